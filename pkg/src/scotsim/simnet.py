"""Deterministic discrete-event network simulator.

Single-threaded event loop over a (time, seq) heap; seq is assigned
monotonically at schedule time, so identical schedules replay identically.
Each directed overlay link is a FIFO output queue with a service rate (one
message leaves every 1/rate) and a propagation latency added after the
message leaves the queue.  Broker link-status tables mirror the queues
exactly: the loop updates them on every enqueue and departure.

Congestion scripting degrades a link's service rate over an interval and
optionally stuffs a synthetic filler backlog into the queue so the
congestion predicate trips without needing background traffic.  Fillers
consume capacity but are metered separately from protocol messages.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from .broker import Deliver, ScotBroker, Send
from .baseline import TidBroker
from .messages import FillerMsg, Notification, message_hops
from .metrics import MetricsCollector
from .topology import BrokerId, ScotTopology


class SimBudgetError(RuntimeError):
    """The event loop exceeded its budget (routing-loop tripwire)."""


class RoutingLoopError(RuntimeError):
    """A message exceeded the hop ceiling (2x broker count)."""


@dataclass(frozen=True)
class CongestionInjection:
    """Degrade one link direction to ``degraded_rate`` during
    [start, end) and stuff ``backlog`` filler messages in at ``start``."""

    src: BrokerId
    dst: BrokerId
    start: float
    end: float
    degraded_rate: float = 0.001
    backlog: int = 60

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError("injection end must be after start")
        if self.degraded_rate <= 0:
            raise ValueError("degraded service rate must be positive")
        if self.backlog < 0:
            raise ValueError("backlog cannot be negative")


class LinkQueue:
    __slots__ = ("src", "dst", "latency", "base_rate", "rate", "queue", "busy")

    def __init__(self, src, dst, latency, rate):
        self.src = src
        self.dst = dst
        self.latency = latency
        self.base_rate = rate
        self.rate = rate
        self.queue: deque = deque()
        self.busy = False


def make_broker_factory(routing: str):
    """Broker constructor for a routing mode: 'snr' | 'idr' | 'tid-static'."""
    if routing in ("snr", "idr"):
        def factory(broker_id, topology, tau, t_w, counters, trace):
            return ScotBroker(broker_id, topology, tau, t_w, routing=routing,
                              counters=counters, trace=trace)
    elif routing == "tid-static":
        def factory(broker_id, topology, tau, t_w, counters, trace):
            return TidBroker(broker_id, topology, tau, t_w,
                             counters=counters, trace=trace)
    else:
        raise ValueError(f"unknown routing mode {routing!r}")
    return factory


class Network:
    """One overlay under simulation: brokers, directed link queues, clients,
    and the event loop."""

    def __init__(self, topology: ScotTopology, routing: str = "snr",
                 tau: float = 10.0, t_w: float = 50.0,
                 latency: float = 1.0, service_rate: float = 1.0,
                 metrics: MetricsCollector | None = None,
                 trace=None, event_budget: int = 2_000_000):
        self.topology = topology
        self.routing = routing
        self.tau = tau
        self.t_w = t_w
        self.metrics = metrics if metrics is not None else MetricsCollector()
        self.trace = trace
        factory = make_broker_factory(routing)
        self.brokers = {
            b: factory(b, topology, tau, t_w, self.metrics.counters, trace)
            for b in topology.brokers
        }
        self.links = {
            (u, v): LinkQueue(u, v, latency, service_rate)
            for (u, v) in topology.directed_links()
        }
        self.clients: dict[str, BrokerId] = {}
        self.now = 0.0
        self._seq = 0
        self._heap: list = []
        self._events_processed = 0
        self.event_budget = event_budget
        self._pending_arrivals = 0
        self._hop_ceiling = 2 * len(self.brokers)

    # -- scheduling -------------------------------------------------------------

    def _push(self, time: float, kind: str, data) -> None:
        if time < self.now:
            raise ValueError(f"cannot schedule into the past ({time} < {self.now})")
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, kind, data))

    def attach_client(self, client: str, broker: BrokerId) -> None:
        if not self.topology.has_broker(broker):
            raise ValueError(f"cannot attach {client!r}: unknown broker {broker}")
        existing = self.clients.get(client)
        if existing is not None and existing != broker:
            raise ValueError(f"client {client!r} already attached to {existing}")
        self.clients[client] = broker

    def schedule_advertise(self, time: float, client: str, adv) -> None:
        self._push(time, "client", (client, "advertise", adv))

    def schedule_subscribe(self, time: float, client: str, sub) -> None:
        self._push(time, "client", (client, "subscribe", sub))

    def schedule_unsubscribe(self, time: float, client: str, sub_id: str) -> None:
        self._push(time, "client", (client, "unsubscribe", sub_id))

    def schedule_publish(self, time: float, client: str, notif: Notification) -> None:
        self._push(time, "client", (client, "publish", notif))

    def schedule_injection(self, inj: CongestionInjection) -> None:
        if (inj.src, inj.dst) not in self.links:
            raise ValueError(f"unknown link {inj.src}->{inj.dst}")
        self._push(inj.start, "inj_start", inj)
        self._push(inj.end, "inj_end", inj)

    # -- event loop ---------------------------------------------------------------

    def run(self, until: float | None = None) -> float:
        """Process events in (time, seq) order until quiescence, or stop
        before the first event past ``until``."""
        while self._heap:
            t = self._heap[0][0]
            if until is not None and t > until:
                break
            time, _, kind, data = heapq.heappop(self._heap)
            self.now = time
            self._events_processed += 1
            if self._events_processed > self.event_budget:
                raise SimBudgetError(
                    f"event budget {self.event_budget} exceeded at t={self.now} "
                    f"(last event {kind}); likely a routing loop or runaway workload"
                )
            if kind == "client":
                self._do_client(data)
            elif kind == "arrive":
                self._do_arrive(data)
            elif kind == "depart":
                self._do_depart(data)
            elif kind == "inj_start":
                self._do_inj_start(data)
            elif kind == "inj_end":
                self._do_inj_end(data)
            else:  # pragma: no cover
                raise AssertionError(f"unknown event kind {kind}")
        return self.now

    def run_to_quiescence(self) -> float:
        return self.run(until=None)

    @property
    def quiescent(self) -> bool:
        return not self._heap

    def in_flight(self) -> int:
        return sum(len(l.queue) for l in self.links.values()) + self._pending_arrivals

    # -- event handlers -------------------------------------------------------------

    def _do_client(self, data) -> None:
        client, action, payload = data
        broker_id = self.clients[client]
        broker = self.brokers[broker_id]
        self.metrics.on_client(action)
        if self.trace:
            self.trace({"t": self.now, "ev": f"client_{action}", "client": client,
                        "broker": str(broker_id)})
        if action == "advertise":
            actions = broker.client_advertise(payload, self.now)
        elif action == "subscribe":
            actions = broker.client_subscribe(payload, self.now)
        elif action == "unsubscribe":
            actions = broker.client_unsubscribe(payload, client, self.now)
        elif action == "publish":
            self.metrics.on_publish(payload, self.now)
            actions = broker.client_publish(payload, self.now)
        else:  # pragma: no cover
            raise AssertionError(f"unknown client action {action}")
        self._apply(broker_id, actions)

    def _apply(self, src: BrokerId, actions) -> None:
        for act in actions:
            if isinstance(act, Send):
                self._send(src, act.dst, act.msg)
            elif isinstance(act, Deliver):
                self.metrics.on_deliver(act.client, act.notif, self.now)
                if self.trace:
                    self.trace({"t": self.now, "ev": "deliver", "client": act.client,
                                "notif": act.notif.notif_id, "hops": act.notif.hops})
            else:  # pragma: no cover
                raise AssertionError(f"unknown action {act!r}")

    def _send(self, src: BrokerId, dst: BrokerId, msg) -> None:
        try:
            link = self.links[(src, dst)]
        except KeyError:
            raise AssertionError(f"broker {src} tried to send over missing link to {dst}")
        self.metrics.on_send(src, dst, msg, self.now)
        if self.trace:
            self.trace({"t": self.now, "ev": "send", "src": str(src), "dst": str(dst),
                        "kind": type(msg).__name__,
                        "id": getattr(msg, "notif_id", None)})
        self.brokers[src].lst_on_enqueue(dst, self.now)
        link.queue.append(msg)
        self.metrics.on_queue_len(self.now, src, dst, len(link.queue))
        if not link.busy:
            link.busy = True
            self._push(self.now + 1.0 / link.rate, "depart", (src, dst))

    def _do_depart(self, key) -> None:
        link = self.links[key]
        msg = link.queue.popleft()
        self.brokers[link.src].lst_on_depart(link.dst, self.now)
        self.metrics.on_queue_len(self.now, link.src, link.dst, len(link.queue))
        self._pending_arrivals += 1
        self._push(self.now + link.latency, "arrive", (link.src, link.dst, msg))
        if link.queue:
            self._push(self.now + 1.0 / link.rate, "depart", key)
        else:
            link.busy = False

    def _do_arrive(self, data) -> None:
        src, dst, msg = data
        self._pending_arrivals -= 1
        self.metrics.on_receive(src, dst, msg, self.now)
        if message_hops(msg) > self._hop_ceiling:
            raise RoutingLoopError(
                f"message exceeded hop ceiling {self._hop_ceiling}: {msg!r}"
            )
        actions = self.brokers[dst].handle(msg, src, self.now)
        self._apply(dst, actions)

    def _do_inj_start(self, inj: CongestionInjection) -> None:
        link = self.links[(inj.src, inj.dst)]
        link.rate = inj.degraded_rate
        for i in range(inj.backlog):
            self._send(inj.src, inj.dst, FillerMsg(seq=i))

    def _do_inj_end(self, inj: CongestionInjection) -> None:
        link = self.links[(inj.src, inj.dst)]
        link.rate = link.base_rate
