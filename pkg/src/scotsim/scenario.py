"""Scenario configuration and the experiment runner.

A scenario runs in three quiesced phases -- advertisements, subscriptions,
then notifications (with optional congestion injections and unsubscribes) --
so tables settle before traffic flows.  Workloads are either generated from
the seed (publisher/subscriber counts plus a selectivity target) or scripted
explicitly, client by client.  Identical (config, seed) pairs produce
byte-identical reports and CSV files.

Scripted builders at the bottom reproduce the worked routing examples:
the single-advertisement walk, the three-publisher static routing walk, the
four congestion cases, and the high-rate-publisher burst.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

from .messages import Notification, parse_filter, Advertisement, Subscription
from .metrics import MetricsCollector, MetricsReport, compare_runs, comparison_csv
from .simnet import CongestionInjection, Network
from .topology import (
    ScotTopology,
    build_preset,
    build_scot,
    parse_broker,
    preset_factors,
)
from .graphs import load_graph_file
from .workload import generate_workload

ROUTING_MODES = ("snr", "idr", "tid-static")

_PHASE_GAP = 10.0


class ConfigError(ValueError):
    """Invalid scenario configuration (message names the offending field)."""


@dataclass(frozen=True)
class InjectionSpec:
    """Congestion injection in config form; times are offsets from the start
    of the notification phase."""

    src: str
    dst: str
    start: float = 0.0
    end: float = 1000.0
    rate: float = 0.001
    backlog: int = 60


@dataclass
class ScenarioConfig:
    topology: object = "fig3"  # preset name or {"af_file":..., "cf_file":...}
    routing: str = "snr"
    publishers: int = 2
    subscribers: int = 10
    notifications: int = 50
    selectivity: float = 0.02
    notif_rate: float = 1.0  # publishes per unit simulated time
    tau: float = 10.0
    t_w: float = 50.0
    latency: float = 1.0
    service_rate: float = 1.0
    seed: int = 0
    horizon: float | None = None  # cap on the notification phase, if set
    injections: list = field(default_factory=list)  # InjectionSpec items
    watch_brokers: list = field(default_factory=list)
    explicit: dict | None = None
    event_budget: int = 2_000_000

    def validate(self) -> None:
        if self.routing not in ROUTING_MODES:
            raise ConfigError(
                f"routing must be one of {ROUTING_MODES}, got {self.routing!r}"
            )
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.t_w <= 0:
            raise ConfigError(f"t_w must be positive, got {self.t_w}")
        if self.latency < 0:
            raise ConfigError(f"latency cannot be negative, got {self.latency}")
        if self.service_rate <= 0:
            raise ConfigError(f"service_rate must be positive, got {self.service_rate}")
        if not (0 < self.selectivity <= 1):
            raise ConfigError(f"selectivity must be in (0, 1], got {self.selectivity}")
        if self.notif_rate <= 0:
            raise ConfigError(f"notif_rate must be positive, got {self.notif_rate}")
        if self.explicit is None:
            if self.publishers < 1:
                raise ConfigError("publishers must be >= 1")
            if self.subscribers < 0:
                raise ConfigError("subscribers cannot be negative")
            if self.notifications < 0:
                raise ConfigError("notifications cannot be negative")
        else:
            for section in ("advertisements", "subscriptions", "notifications"):
                if section in self.explicit and not isinstance(self.explicit[section], list):
                    raise ConfigError(f"explicit.{section} must be a list")
        if self.explicit is not None and self.routing == "tid-static":
            if self.explicit.get("unsubscribes"):
                raise ConfigError("the tid-static baseline does not support unsubscribe")

    def fingerprint(self) -> dict:
        """Everything that defines the workload (plus routing, which
        comparisons strip)."""
        echo = asdict(self)
        echo["topology"] = (
            self.topology if isinstance(self.topology, str) else dict(self.topology)
        )
        return echo

    def to_json(self) -> str:
        return json.dumps(self.fingerprint(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ScenarioConfig":
        data = json.loads(text)
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
        if "injections" in data:
            data["injections"] = [
                InjectionSpec(**item) if isinstance(item, dict) else item
                for item in data["injections"]
            ]
        return cls(**data)

    @classmethod
    def from_file(cls, path: str) -> "ScenarioConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def load_topology(spec) -> ScotTopology:
    if isinstance(spec, str):
        return build_preset(spec)
    if isinstance(spec, dict) and "af_file" in spec and "cf_file" in spec:
        return build_scot(load_graph_file(spec["af_file"]),
                          load_graph_file(spec["cf_file"]))
    raise ConfigError(
        "topology must be a preset name or {'af_file': ..., 'cf_file': ...}"
    )


def _explicit_clients(config: ScenarioConfig, topology: ScotTopology):
    """Expand the explicit workload section into placed clients/messages."""
    ex = config.explicit
    adverts = []
    for i, item in enumerate(ex.get("advertisements", ())):
        client = item["client"]
        adv = Advertisement(
            adv_id=item.get("id", f"{client}/a{i}"),
            publisher=client,
            predicates=parse_filter(item["filter"]),
        )
        adverts.append((client, parse_broker(item["broker"]), adv))
    subs = []
    for j, item in enumerate(ex.get("subscriptions", ())):
        client = item["client"]
        sub = Subscription(
            sub_id=item.get("id", f"{client}/s{j}"),
            subscriber=client,
            predicates=parse_filter(item["filter"]),
        )
        subs.append((client, parse_broker(item["broker"]), sub))
    notifs = []
    for k, item in enumerate(ex.get("notifications", ())):
        client = item["client"]
        notifs.append(
            (client, float(item.get("at", k)), Notification(
                item.get("id", f"{client}/n{k}"), client, dict(item["payload"])
            ))
        )
    unsubs = [
        (item["client"], float(item.get("at", 0.0)), item["sub_id"])
        for item in ex.get("unsubscribes", ())
    ]
    return adverts, subs, notifs, unsubs


def run_scenario(config: ScenarioConfig, out_dir: str | None = None,
                 trace=None) -> MetricsReport:
    """Execute one scenario and return its report (optionally writing the
    CSV set to ``out_dir``)."""
    config.validate()
    topology = load_topology(config.topology)
    metrics = MetricsCollector(watch_brokers=config.watch_brokers)
    net = Network(
        topology, routing=config.routing, tau=config.tau, t_w=config.t_w,
        latency=config.latency, service_rate=config.service_rate,
        metrics=metrics, trace=trace, event_budget=config.event_budget,
    )

    if config.explicit is not None:
        adverts, subs, notifs, unsubs = _explicit_clients(config, topology)
    else:
        workload = generate_workload(
            topology, config.seed, config.publishers, config.subscribers,
            config.notifications, config.selectivity,
        )
        adverts = [(p.client, p.broker, adv) for p, adv in workload.advertisements]
        subs = [(p.client, p.broker, sub) for p, sub in workload.subscriptions]
        notifs = [
            (client, k / config.notif_rate, notif)
            for k, (client, notif) in enumerate(workload.notifications)
        ]
        unsubs = []

    # Phase A: advertisements, then drain.
    for i, (client, broker, adv) in enumerate(adverts):
        net.attach_client(client, broker)
        net.schedule_advertise(float(i), client, adv)
    net.run_to_quiescence()

    # Phase B: subscriptions, then drain.
    start = net.now + _PHASE_GAP
    for j, (client, broker, sub) in enumerate(subs):
        net.attach_client(client, broker)
        net.schedule_subscribe(start + j, client, sub)
    net.run_to_quiescence()

    # Phase C: notifications, congestion scripting, unsubscribes.
    base = net.now + _PHASE_GAP
    for spec in config.injections:
        inj = spec if isinstance(spec, InjectionSpec) else InjectionSpec(**spec)
        net.schedule_injection(CongestionInjection(
            src=parse_broker(inj.src), dst=parse_broker(inj.dst),
            start=base + inj.start, end=base + inj.end,
            degraded_rate=inj.rate, backlog=inj.backlog,
        ))
    for client, offset, notif in notifs:
        net.schedule_publish(base + offset, client, notif)
    for client, offset, sub_id in unsubs:
        net.schedule_unsubscribe(base + offset, client, sub_id)
    net.run(until=None if config.horizon is None else base + config.horizon)

    report = metrics.finalize(net, config.fingerprint())
    if out_dir is not None:
        report.write_csv(out_dir)
    return report


def run_comparison(config: ScenarioConfig, routing_a: str, routing_b: str,
                   out_dir: str | None = None):
    """Run one workload under two routing modes and tabulate the deltas."""
    report_a = run_scenario(replace(config, routing=routing_a))
    report_b = run_scenario(replace(config, routing=routing_b))
    rows = compare_runs(report_a, report_b)
    if out_dir is not None:
        import os

        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "comparison.csv"), "w",
                  encoding="utf-8", newline="") as fh:
            fh.write(comparison_csv(rows))
    return report_a, report_b, rows


# -- scripted scenarios -------------------------------------------------------

MATCH_ALL_FILTER = "x >= 0"
FULL_RANGE_FILTER = "x between 0 100"


def single_advertisement_scenario(with_subscribers: bool = False) -> ScenarioConfig:
    """One publisher at (a,0) on the 18-broker preset; expected behaviour is
    two advertisement hops (one per secondary cluster) and, when subscribers
    are pre-registered in the other clusters, one interest announcement per
    interested cluster."""
    explicit = {
        "advertisements": [
            {"client": "P1", "broker": "(a,0)", "filter": FULL_RANGE_FILTER},
        ],
        "subscriptions": [],
        "notifications": [],
    }
    if with_subscribers:
        explicit["subscriptions"] = [
            {"client": "S1", "broker": "(c,1)", "filter": MATCH_ALL_FILTER},
            {"client": "S2", "broker": "(d,2)", "filter": MATCH_ALL_FILTER},
        ]
    cfg = ScenarioConfig(topology="fig3", routing="snr", explicit=explicit)
    return cfg


def static_routing_walkthrough(routing: str = "snr") -> ScenarioConfig:
    """Three publishers with disjoint price bands and four subscribers on the
    18-broker preset; reproduces the A_cxt vectors 100 / 101 / 111 and the
    per-publisher copy counts of the static routing walk."""
    explicit = {
        "advertisements": [
            {"client": "P1", "broker": "(a,2)", "filter": "x between 10 19"},
            {"client": "P2", "broker": "(a,1)", "filter": "x between 20 29"},
            {"client": "P3", "broker": "(e,1)", "filter": "x between 30 39"},
        ],
        "subscriptions": [
            {"client": "S1", "broker": "(a,0)", "filter": "x between 20 39"},
            {"client": "S2", "broker": "(f,0)", "filter": "x between 30 39"},
            {"client": "S3", "broker": "(f,1)", "filter": "x between 35 39"},
            {"client": "S4", "broker": "(f,2)", "filter": "x between 10 39"},
        ],
        "notifications": [
            {"client": "P1", "at": 0.0, "payload": {"x": 15}},
            {"client": "P2", "at": 120.0, "payload": {"x": 25}},
            {"client": "P3", "at": 240.0, "payload": {"x": 35}},
        ],
    }
    return ScenarioConfig(topology="fig3", routing=routing, explicit=explicit)


_CONGESTION_CASES = {
    # case -> (subscriptions, congested links, publish offset)
    "a": (
        [("S1", "(c,0)"), ("S2", "(c,1)"), ("S3", "(a,2)"), ("S4", "(c,2)")],
        [("(b,2)", "(b,0)", 60)],
    ),
    "b": (
        [("S1", "(c,0)"), ("S2", "(c,1)"), ("S2b", "(b,1)"), ("S4", "(c,2)")],
        [("(b,2)", "(b,0)", 60), ("(b,2)", "(b,1)", 60)],
    ),
    "c": (
        [("S1", "(c,0)"), ("S2", "(c,1)"), ("S3", "(a,2)"), ("S4", "(c,2)")],
        [("(b,2)", "(b,0)", 60), ("(b,1)", "(b,0)", 60), ("(c,1)", "(c,0)", 60)],
    ),
    "d": (
        [("S1", "(a,0)"), ("S2", "(c,1)"), ("S3", "(c,2)"), ("S4", "(c,2)")],
        [("(b,2)", "(b,0)", 70), ("(b,2)", "(b,1)", 60), ("(b,2)", "(c,2)", 60)],
    ),
}


def congestion_case_scenario(case: str, routing: str = "idr") -> ScenarioConfig:
    """The four scripted congestion cases on the 9-broker preset (publisher P
    at (b,2), all subscribers matching).  Expected inter-broker message
    counts for one published notification:

    ========  =====  =====  ==================
    case       IDR    SNR    host CIV-N bits
    ========  =====  =====  ==================
    a           6      6      001
    b           4      5      011
    c           5      6      001
    d           5      5      001
    ========  =====  =====  ==================
    """
    try:
        subs, links = _CONGESTION_CASES[case]
    except KeyError:
        raise ValueError(f"case must be one of a/b/c/d, got {case!r}") from None
    explicit = {
        "advertisements": [
            {"client": "P", "broker": "(b,2)", "filter": FULL_RANGE_FILTER},
        ],
        "subscriptions": [
            {"client": c, "broker": b, "filter": MATCH_ALL_FILTER} for c, b in subs
        ],
        "notifications": [
            {"client": "P", "at": 30.0, "payload": {"x": 50}},
        ],
    }
    injections = [
        InjectionSpec(src=s, dst=d, start=0.0, end=200.0, rate=0.001, backlog=n)
        for (s, d, n) in links
    ]
    return ScenarioConfig(
        topology="fig7", routing=routing, explicit=explicit,
        injections=injections, watch_brokers=["(b,2)"],
    )


def burst_scenario(routing: str = "snr", notifications: int = 2000,
                   rate: float = 5.0, background_subs: int = 120) -> ScenarioConfig:
    """High-rate publisher overrunning its host broker's region links.

    The publisher at (b,1) bursts ``notifications`` at ``rate`` per unit time
    against a service rate of 1; interested subscribers sit in every cluster
    (one attached at the host broker itself, so the host's queue pressure is
    carried entirely by the region links that dynamic routing manages).
    Background subscribers register non-overlapping filters to pad the
    tables without joining the delivered set.
    """
    interested = [
        ("H0", "(b,1)"),   # host-cluster subscriber, local to the publisher
        ("H1", "(c,0)"),
        ("H2", "(e,0)"),
        ("H3", "(d,2)"),
        ("H4", "(c,2)"),
    ]
    hosts = ["(a,0)", "(b,0)", "(c,0)", "(d,0)", "(e,0)", "(f,0)",
             "(a,1)", "(b,1)", "(c,1)", "(d,1)", "(e,1)", "(f,1)",
             "(a,2)", "(b,2)", "(c,2)", "(d,2)", "(e,2)", "(f,2)"]
    subs = [
        {"client": c, "broker": b, "filter": "channel = 99, x >= 0"}
        for c, b in interested
    ]
    subs += [
        {"client": f"bg{i:03d}", "broker": hosts[i % len(hosts)],
         "filter": f"channel = {i % 7}, x >= 0"}
        for i in range(background_subs)
    ]
    explicit = {
        "advertisements": [
            {"client": "HRP", "broker": "(b,1)",
             "filter": "channel = 99, x between 0 100"},
        ],
        "subscriptions": subs,
        "notifications": [
            {"client": "HRP", "at": k / rate, "payload": {"channel": 99, "x": 50}}
            for k in range(notifications)
        ],
    }
    return ScenarioConfig(
        topology="fig3", routing=routing, explicit=explicit,
        watch_brokers=["(b,1)"],
    )
