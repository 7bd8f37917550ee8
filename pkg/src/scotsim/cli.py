"""Command-line front end: run scenarios, compare routing modes, inspect and
validate topologies."""

from __future__ import annotations

import argparse
import json
import sys

from .graphs import connectivity_bounds, diameter, load_graph_file
from .metrics import comparison_csv
from .scenario import ConfigError, ScenarioConfig, load_topology, run_comparison, run_scenario
from .topology import build_scot, preset_factors, validate_factors


def _topology_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", help="built-in topology preset (fig3, fig7, fig10)")
    parser.add_argument("--af-file", help="acyclic factor as an edge-list file")
    parser.add_argument("--cf-file", help="connectivity factor as an edge-list file")


def _factors_from_args(args):
    if args.preset:
        return preset_factors(args.preset)
    if args.af_file and args.cf_file:
        return load_graph_file(args.af_file), load_graph_file(args.cf_file)
    raise SystemExit("need --preset or both --af-file and --cf-file")


def _cmd_topology_info(args) -> int:
    g_af, g_cf = _factors_from_args(args)
    topo = build_scot(g_af, g_cf)
    print(f"brokers:   {len(topo.brokers)}")
    print(f"clusters:  {len(topo.clusters)}")
    print(f"regions:   {len(topo.regions)}")
    print(f"alinks:    {len(topo.alinks)}")
    print(f"ilinks:    {len(topo.ilinks)}")
    print(f"diam_af:   {topo.diam_af}")
    if g_af.order >= 2 and g_cf.order >= 2:
        kappa, lam = connectivity_bounds(g_af, g_cf)
        print(f"kappa:     {kappa}")
        print(f"lambda:    {lam}")
    product_vertices = [str(b) for b in topo.brokers]
    print(f"sample brokers: {', '.join(product_vertices[:6])} ...")
    return 0


def _cmd_validate(args) -> int:
    g_af, g_cf = _factors_from_args(args)
    violations = validate_factors(g_af, g_cf)
    if not violations:
        print("ok")
        return 0
    for v in violations:
        print(f"violation {v}")
    return 1


def _make_trace_sink(path):
    fh = open(path, "w", encoding="utf-8")

    def sink(event: dict) -> None:
        fh.write(json.dumps(event, sort_keys=True, default=str) + "\n")

    return sink, fh


def _cmd_run(args) -> int:
    config = ScenarioConfig.from_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.routing is not None:
        config.routing = args.routing
    trace = fh = None
    if args.trace:
        trace, fh = _make_trace_sink(args.trace)
    try:
        report = run_scenario(config, out_dir=args.out, trace=trace)
    finally:
        if fh is not None:
            fh.close()
    for metric, value in report.summary_rows():
        print(f"{metric}: {value}")
    if args.out:
        print(f"csv written to {args.out}")
    return 0


def _cmd_compare(args) -> int:
    config = ScenarioConfig.from_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    _, _, rows = run_comparison(config, args.routing_a, args.routing_b, out_dir=args.out)
    sys.stdout.write(comparison_csv(rows))
    if args.out:
        print(f"comparison written to {args.out}/comparison.csv")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scotsim",
        description="Clustered product-overlay publish/subscribe simulator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario from a JSON config")
    p_run.add_argument("--config", required=True, help="scenario config (JSON)")
    p_run.add_argument("--seed", type=int, help="override the config seed")
    p_run.add_argument("--routing", choices=("snr", "idr", "tid-static"),
                       help="override the config routing mode")
    p_run.add_argument("--out", help="directory for the CSV export")
    p_run.add_argument("--trace", help="write a JSON-lines event trace here")
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run one workload under two routing modes")
    p_cmp.add_argument("--config", required=True)
    p_cmp.add_argument("--routing-a", default="snr", choices=("snr", "idr", "tid-static"))
    p_cmp.add_argument("--routing-b", default="idr", choices=("snr", "idr", "tid-static"))
    p_cmp.add_argument("--seed", type=int)
    p_cmp.add_argument("--out")
    p_cmp.set_defaults(func=_cmd_compare)

    p_info = sub.add_parser("topology-info", help="print overlay structure counts")
    _topology_args(p_info)
    p_info.set_defaults(func=_cmd_topology_info)

    p_val = sub.add_parser("validate", help="check factor graphs against the overlay properties")
    _topology_args(p_val)
    p_val.set_defaults(func=_cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
