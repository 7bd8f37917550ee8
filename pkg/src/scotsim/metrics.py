"""Run instrumentation: message counters, tables snapshot, delivery ledger,
queue statistics, and deterministic CSV export.

The collector is fed by the simulator while a run executes; ``finalize``
freezes everything into a :class:`MetricsReport`.  All export paths sort
rows and format floats with a fixed precision so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

from .messages import (
    AdvertiseMsg,
    CibClearMsg,
    CibSetMsg,
    Notification,
    SubscribeMsg,
    TidAdvertiseMsg,
    TidSubscribeMsg,
    UnsubscribeMsg,
    message_kind,
)

_F = "{:.6f}".format  # stable float rendering for CSV determinism


class WorkloadMismatchError(ValueError):
    """Two reports being compared did not run the same workload."""


class MetricsCollector:
    def __init__(self, watch_brokers=()):
        self.counters: dict[str, int] = {}
        self.im_counts: dict[str, int] = {}
        self.client_counts: dict[str, int] = {}
        self.sends_total = 0
        self.receives_total = 0
        self.published_at: dict[str, float] = {}
        self.notif_sends: dict[str, int] = {}
        self.notif_civ_sends: dict[str, int] = {}
        self.adv_sends: dict[str, int] = {}
        self.adv_max_hops: dict[str, int] = {}
        self.adv_cib_sets: dict[str, int] = {}
        self.sub_sends: dict[str, int] = {}
        self.sub_max_hops: dict[str, int] = {}
        self.deliveries: list[tuple] = []  # (notif_id, client, time, hops, delay)
        self.ledger: dict[str, set] = {}
        self.duplicate_deliveries = 0
        self.link_max_q: dict[tuple, int] = {}
        self.broker_max_q: dict = {}
        self.watch = set(watch_brokers)
        self.queue_samples: list[tuple] = []  # (time, src, dst, q_len)

    # -- simulator hooks ----------------------------------------------------

    def on_client(self, kind: str) -> None:
        self.client_counts[kind] = self.client_counts.get(kind, 0) + 1

    def on_publish(self, notif: Notification, now: float) -> None:
        self.published_at[notif.notif_id] = now

    def on_send(self, src, dst, msg, now: float) -> None:
        kind = message_kind(msg)
        self.im_counts[kind] = self.im_counts.get(kind, 0) + 1
        self.sends_total += 1
        if isinstance(msg, Notification):
            self.notif_sends[msg.notif_id] = self.notif_sends.get(msg.notif_id, 0) + 1
            if msg.civ is not None and msg.civ.any_set():
                self.notif_civ_sends[msg.notif_id] = (
                    self.notif_civ_sends.get(msg.notif_id, 0) + 1
                )
        elif isinstance(msg, (AdvertiseMsg, TidAdvertiseMsg)):
            aid = msg.adv.adv_id
            self.adv_sends[aid] = self.adv_sends.get(aid, 0) + 1
            self.adv_max_hops[aid] = max(self.adv_max_hops.get(aid, 0), msg.hops)
        elif isinstance(msg, (SubscribeMsg, TidSubscribeMsg)):
            sid = msg.sub.sub_id
            self.sub_sends[sid] = self.sub_sends.get(sid, 0) + 1
            self.sub_max_hops[sid] = max(self.sub_max_hops.get(sid, 0), msg.hops)
        elif isinstance(msg, CibSetMsg):
            self.adv_cib_sets[msg.adv_id] = self.adv_cib_sets.get(msg.adv_id, 0) + 1

    def on_receive(self, src, dst, msg, now: float) -> None:
        self.receives_total += 1

    def on_deliver(self, client: str, notif: Notification, now: float) -> None:
        delay = now - self.published_at.get(notif.notif_id, now)
        self.deliveries.append((notif.notif_id, client, now, notif.hops, delay))
        seen = self.ledger.setdefault(notif.notif_id, set())
        if client in seen:
            self.duplicate_deliveries += 1
        seen.add(client)

    def on_queue_len(self, now: float, src, dst, q_len: int) -> None:
        key = (src, dst)
        if q_len > self.link_max_q.get(key, 0):
            self.link_max_q[key] = q_len
        if q_len > self.broker_max_q.get(src, 0):
            self.broker_max_q[src] = q_len
        if str(src) in self.watch:
            self.queue_samples.append((now, src, dst, q_len))

    # -- freezing -------------------------------------------------------------

    def finalize(self, network, config_echo: dict) -> "MetricsReport":
        srt_by_broker = {}
        prt_by_broker = {}
        adv_copies: dict[str, int] = {}
        sub_copies: dict[str, int] = {}
        for bid in sorted(network.brokers):
            broker = network.brokers[bid]
            srt_by_broker[str(bid)] = len(broker.srt)
            prt_by_broker[str(bid)] = len(broker.prt)
            for adv_id in broker.srt:
                adv_copies[adv_id] = adv_copies.get(adv_id, 0) + 1
            seen_subs = {
                key[0] if isinstance(key, tuple) else key for key in broker.prt
            }
            for sid in seen_subs:
                sub_copies[sid] = sub_copies.get(sid, 0) + 1

        in_flight = network.in_flight()
        return MetricsReport(
            config_echo=dict(config_echo),
            end_time=network.now,
            im_counts=dict(sorted(self.im_counts.items())),
            client_counts=dict(sorted(self.client_counts.items())),
            counters=dict(sorted(self.counters.items())),
            srt_by_broker=srt_by_broker,
            prt_by_broker=prt_by_broker,
            adv_copies=dict(sorted(adv_copies.items())),
            adv_sends=dict(sorted(self.adv_sends.items())),
            adv_tree_len=dict(sorted(self.adv_max_hops.items())),
            adv_cib_sets=dict(sorted(self.adv_cib_sets.items())),
            sub_copies=dict(sorted(sub_copies.items())),
            sub_sends=dict(sorted(self.sub_sends.items())),
            sub_depth=dict(sorted(self.sub_max_hops.items())),
            notif_sends=dict(sorted(self.notif_sends.items())),
            notif_civ_sends=dict(sorted(self.notif_civ_sends.items())),
            published_at=dict(sorted(self.published_at.items())),
            deliveries=sorted(self.deliveries),
            ledger={k: tuple(sorted(v)) for k, v in sorted(self.ledger.items())},
            duplicate_deliveries=self.duplicate_deliveries,
            link_max_q={(str(s), str(d)): q for (s, d), q in sorted(self.link_max_q.items())},
            broker_max_q={str(b): q for b, q in sorted(self.broker_max_q.items())},
            queue_samples=[(t, str(s), str(d), q) for (t, s, d, q) in self.queue_samples],
            sends_total=self.sends_total,
            receives_total=self.receives_total,
            in_flight_at_end=in_flight,
        )


@dataclass
class MetricsReport:
    """Frozen per-run results; see the CSV schema section of the README."""

    config_echo: dict
    end_time: float
    im_counts: dict
    client_counts: dict
    counters: dict
    srt_by_broker: dict
    prt_by_broker: dict
    adv_copies: dict
    adv_sends: dict
    adv_tree_len: dict
    adv_cib_sets: dict
    sub_copies: dict
    sub_sends: dict
    sub_depth: dict
    notif_sends: dict
    notif_civ_sends: dict
    published_at: dict
    deliveries: list
    ledger: dict
    duplicate_deliveries: int
    link_max_q: dict
    broker_max_q: dict
    queue_samples: list
    sends_total: int
    receives_total: int
    in_flight_at_end: int

    # -- derived ----------------------------------------------------------------

    @property
    def total_ims(self) -> int:
        """All broker-to-broker protocol messages (filler load excluded)."""
        return sum(v for k, v in self.im_counts.items() if k != "filler")

    @property
    def srt_total(self) -> int:
        return sum(self.srt_by_broker.values())

    @property
    def prt_total(self) -> int:
        return sum(self.prt_by_broker.values())

    @property
    def delivered_sets(self) -> dict:
        return self.ledger

    def notification_ims(self, notif_id: str) -> int:
        return self.notif_sends.get(notif_id, 0)

    def max_queue_at(self, broker_label: str) -> int:
        return self.broker_max_q.get(broker_label, 0)

    def max_delay(self) -> float:
        return max((d[4] for d in self.deliveries), default=0.0)

    def mean_delay(self) -> float:
        if not self.deliveries:
            return 0.0
        return sum(d[4] for d in self.deliveries) / len(self.deliveries)

    def conservation_ok(self) -> bool:
        return self.sends_total == self.receives_total + self.in_flight_at_end

    def summary_rows(self) -> list[tuple]:
        rows = [
            ("routing", self.config_echo.get("routing", "")),
            ("seed", self.config_echo.get("seed", "")),
            ("topology", _topology_label(self.config_echo.get("topology", ""))),
            ("end_time", _F(self.end_time)),
            ("total_ims", self.total_ims),
        ]
        rows += [(f"ims_{k}", v) for k, v in sorted(self.im_counts.items())]
        rows += [(f"client_{k}", v) for k, v in sorted(self.client_counts.items())]
        rows += [(f"counter_{k}", v) for k, v in sorted(self.counters.items())]
        rows += [
            ("srt_total", self.srt_total),
            ("prt_total", self.prt_total),
            ("deliveries", len(self.deliveries)),
            ("distinct_delivered_notifs", len(self.ledger)),
            ("duplicate_deliveries", self.duplicate_deliveries),
            ("max_queue_global", max(self.broker_max_q.values(), default=0)),
            ("mean_delivery_delay", _F(self.mean_delay())),
            ("max_delivery_delay", _F(self.max_delay())),
            ("sends_total", self.sends_total),
            ("receives_total", self.receives_total),
            ("in_flight_at_end", self.in_flight_at_end),
            ("conservation_ok", int(self.conservation_ok())),
        ]
        return rows

    # -- CSV export -----------------------------------------------------------

    def csv_files(self) -> dict[str, str]:
        """All exports as name -> file content (deterministic bytes)."""
        files = {}
        files["summary.csv"] = _csv(["metric", "value"], self.summary_rows())
        files["message_counts.csv"] = _csv(
            ["kind", "count"], sorted(self.im_counts.items())
        )
        files["deliveries.csv"] = _csv(
            ["notif_id", "subscriber", "delivered_at", "hops", "delay"],
            [(n, c, _F(t), h, _F(dl)) for (n, c, t, h, dl) in self.deliveries],
        )
        files["tables.csv"] = _csv(
            ["broker", "srt_entries", "prt_entries", "max_out_queue"],
            [
                (b, self.srt_by_broker[b], self.prt_by_broker[b],
                 self.broker_max_q.get(b, 0))
                for b in sorted(self.srt_by_broker)
            ],
        )
        files["advertisements.csv"] = _csv(
            ["adv_id", "copies_stored", "ims", "tree_length", "cib_sets"],
            [
                (a, self.adv_copies.get(a, 0), self.adv_sends.get(a, 0),
                 self.adv_tree_len.get(a, 0), self.adv_cib_sets.get(a, 0))
                for a in sorted(set(self.adv_copies) | set(self.adv_sends))
            ],
        )
        files["subscriptions.csv"] = _csv(
            ["sub_id", "copies_stored", "ims", "tree_depth"],
            [
                (s, self.sub_copies.get(s, 0), self.sub_sends.get(s, 0),
                 self.sub_depth.get(s, 0))
                for s in sorted(set(self.sub_copies) | set(self.sub_sends))
            ],
        )
        files["notifications.csv"] = _csv(
            ["notif_id", "published_at", "ims", "civ_sends", "deliveries"],
            [
                (n, _F(self.published_at.get(n, 0.0)), self.notif_sends.get(n, 0),
                 self.notif_civ_sends.get(n, 0), len(self.ledger.get(n, ())))
                for n in sorted(self.published_at)
            ],
        )
        if self.queue_samples:
            t_w = float(self.config_echo.get("t_w", 50.0))
            windows: dict[tuple, int] = {}
            for (t, s, d, q) in self.queue_samples:
                w = math.floor(t / t_w) * t_w
                key = (w, s, d)
                windows[key] = max(windows.get(key, 0), q)
            files["queues.csv"] = _csv(
                ["window_start", "broker", "link_to", "max_q_len"],
                [(_F(w), s, d, q) for (w, s, d), q in sorted(windows.items())],
            )
        return files

    def write_csv(self, out_dir: str) -> list[str]:
        os.makedirs(out_dir, exist_ok=True)
        written = []
        for name, content in sorted(self.csv_files().items()):
            path = os.path.join(out_dir, name)
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(content)
            written.append(path)
        return written


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(list(row))
    return buf.getvalue()


def _topology_label(spec) -> str:
    return spec if isinstance(spec, str) else "custom"


def _workload_fingerprint(report: MetricsReport) -> dict:
    echo = dict(report.config_echo)
    echo.pop("routing", None)
    return echo


def compare_runs(report_a: MetricsReport, report_b: MetricsReport) -> list[tuple]:
    """Side-by-side rows for two runs of the same workload under different
    routing modes; raises :class:`WorkloadMismatchError` otherwise."""
    if _workload_fingerprint(report_a) != _workload_fingerprint(report_b):
        raise WorkloadMismatchError(
            "reports come from different workloads; compare runs that share a "
            "topology, seed and client schedule"
        )
    rows = [
        ("routing", report_a.config_echo.get("routing"), report_b.config_echo.get("routing")),
        ("total_ims", report_a.total_ims, report_b.total_ims),
    ]
    kinds = sorted(set(report_a.im_counts) | set(report_b.im_counts))
    rows += [
        (f"ims_{k}", report_a.im_counts.get(k, 0), report_b.im_counts.get(k, 0))
        for k in kinds
    ]
    rows += [
        ("deliveries", len(report_a.deliveries), len(report_b.deliveries)),
        ("mean_delivery_delay", _F(report_a.mean_delay()), _F(report_b.mean_delay())),
        ("max_delivery_delay", _F(report_a.max_delay()), _F(report_b.max_delay())),
        ("max_queue_global",
         max(report_a.broker_max_q.values(), default=0),
         max(report_b.broker_max_q.values(), default=0)),
        ("srt_total", report_a.srt_total, report_b.srt_total),
        ("prt_total", report_a.prt_total, report_b.prt_total),
        ("delivered_sets_equal",
         int(report_a.ledger == report_b.ledger),
         int(report_a.ledger == report_b.ledger)),
    ]
    watched = sorted(
        set(report_a.broker_max_q) & set(report_b.broker_max_q)
        & {str(b) for b in report_a.config_echo.get("watch_brokers", [])}
    )
    rows += [
        (f"max_queue_at_{b}", report_a.broker_max_q[b], report_b.broker_max_q[b])
        for b in watched
    ]
    return rows


def comparison_csv(rows) -> str:
    return _csv(["metric", "run_a", "run_b"], rows)
