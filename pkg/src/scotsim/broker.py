"""Broker state machine for the clustered overlay.

Each broker owns three tables:

* SRT -- advertisements.  The publisher's host broker stores the entry with
  an A_cxt bit vector whose bits mark target clusters; the host's
  same-region (secondary) brokers store it with the S_cxt vector carried on
  the wire.
* PRT -- subscriptions, flooded over the subscriber's host cluster only.
* LST -- per outgoing link: queue length plus in/out counters for the
  current tumbling window, mirroring the simulator's queues.

Advertisements travel exactly one hop (host to its region); subscriptions
flood the host cluster's tree; notifications retrace subscription paths
(reverse-path forwarding) and cross clusters over the region links named by
the advertisement's bit vector.  Dynamic routing (IDR) consults the LST and
reroutes around congested region links by attaching a P_cxt vector to one
surviving copy (the CIV-notification).

A broker instance is single-owner: exactly one execution context mutates it
at a time; brokers interact only through messages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .messages import (
    A_CXT,
    P_CXT,
    S_CXT,
    AdvertiseMsg,
    CibClearMsg,
    CibSetMsg,
    Civ,
    FillerMsg,
    Notification,
    SubscribeMsg,
    UnsubscribeMsg,
    overlaps,
    payload_satisfies,
)
from .topology import BrokerId, ScotTopology


class RoutingError(RuntimeError):
    """A notification that cannot be routed (no matching advertisement at
    the publisher's host broker)."""


@dataclass
class SrtEntry:
    advertisement: object
    last_hop: object  # BrokerId or client id string
    civ: Civ


@dataclass
class PrtEntry:
    subscription: object
    last_hop: object  # BrokerId or client id string


@dataclass
class LstEntry:
    """Counters for one outgoing link direction.  ``q_in``/``q_out`` count
    messages entering/leaving the output queue in the current tumbling
    window; ``q_len`` is the live queue length."""

    q_in: int = 0
    q_out: int = 0
    q_len: int = 0
    window_start: float = 0.0

    def roll(self, now: float, t_w: float) -> None:
        ws = math.floor(now / t_w) * t_w
        if ws > self.window_start:
            self.window_start = ws
            self.q_in = 0
            self.q_out = 0


def is_congested(entry: LstEntry, tau: float) -> bool:
    """Congestion predicate: q_len * (1 + q_in) / (1 + q_out) > tau.

    The ratio term is the congestion element; the comparison is strict, so a
    queue sitting exactly at tau is not yet congested and an empty queue
    never is.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    ce = (1 + entry.q_in) / (1 + entry.q_out)
    return entry.q_len * ce > tau


@dataclass(frozen=True)
class RoutingStepStats:
    """Per-routing-step target accounting (alpha target aLinks, beta target
    iLinks split into theta unoverloaded + ol overloaded, gamma notifications
    seen at this broker in the current window)."""

    alpha: int
    beta: int
    theta: int
    ol: int
    gamma: int

    def __post_init__(self):
        assert self.theta + self.ol == self.beta


@dataclass(frozen=True)
class Send:
    dst: BrokerId
    msg: object


@dataclass(frozen=True)
class Deliver:
    client: str
    notif: Notification


def _is_client(sender) -> bool:
    return isinstance(sender, str)


class BrokerCore:
    """Table-free base: link status tracking shared by both broker kinds."""

    def __init__(self, broker_id: BrokerId, topology: ScotTopology,
                 tau: float = 10.0, t_w: float = 50.0,
                 counters=None, trace=None):
        self.id = broker_id
        self.topology = topology
        self.tau = tau
        self.t_w = t_w
        self.counters = counters if counters is not None else {}
        self.trace = trace
        self.lst = {n: LstEntry() for n in topology.all_neighbours(broker_id)}

    def _count(self, key: str, n: int = 1) -> None:
        self.counters[key] = self.counters.get(key, 0) + n

    def _emit(self, **event) -> None:
        if self.trace is not None:
            self.trace(event)

    # Simulator hooks: keep the LST an exact mirror of the output queues.

    def lst_on_enqueue(self, dst: BrokerId, now: float) -> None:
        e = self.lst[dst]
        e.roll(now, self.t_w)
        e.q_in += 1
        e.q_len += 1

    def lst_on_depart(self, dst: BrokerId, now: float) -> None:
        e = self.lst[dst]
        e.roll(now, self.t_w)
        e.q_out += 1
        e.q_len -= 1

    def link_congested(self, dst: BrokerId, now: float) -> bool:
        e = self.lst[dst]
        e.roll(now, self.t_w)
        return is_congested(e, self.tau)


class ScotBroker(BrokerCore):
    """Cluster-aware broker implementing the advertisement/subscription
    protocols and both notification routing algorithms."""

    def __init__(self, broker_id, topology, tau=10.0, t_w=50.0,
                 routing: str = "snr", counters=None, trace=None):
        super().__init__(broker_id, topology, tau, t_w, counters, trace)
        if routing not in ("snr", "idr"):
            raise ValueError(f"unknown routing mode {routing!r}")
        self.routing = routing
        self.srt: dict[str, SrtEntry] = {}
        self.prt: dict[str, PrtEntry] = {}
        self._gamma_window = 0.0
        self._gamma = 0

    # -- client entry points -------------------------------------------------

    def client_advertise(self, adv, now: float = 0.0) -> list:
        return self._handle_advertise(AdvertiseMsg(adv), adv.publisher)

    def client_subscribe(self, sub, now: float = 0.0) -> list:
        return self._handle_subscribe(SubscribeMsg(sub), sub.subscriber)

    def client_unsubscribe(self, sub_id: str, client: str, now: float = 0.0) -> list:
        return self._handle_unsubscribe(UnsubscribeMsg(sub_id), client)

    def client_publish(self, n: Notification, now: float) -> list:
        return self._route(n, n.publisher, now)

    # -- dispatch ----------------------------------------------------------

    def handle(self, msg, sender, now: float) -> list:
        if isinstance(msg, AdvertiseMsg):
            return self._handle_advertise(msg, sender)
        if isinstance(msg, SubscribeMsg):
            return self._handle_subscribe(msg, sender)
        if isinstance(msg, UnsubscribeMsg):
            return self._handle_unsubscribe(msg, sender)
        if isinstance(msg, CibSetMsg):
            return self._handle_cib_set(msg)
        if isinstance(msg, CibClearMsg):
            return self._handle_cib_clear(msg)
        if isinstance(msg, Notification):
            return self._route(msg, sender, now)
        if isinstance(msg, FillerMsg):
            return []
        raise TypeError(f"broker cannot handle {type(msg).__name__}")

    # -- advertisements ------------------------------------------------------

    def _handle_advertise(self, msg: AdvertiseMsg, sender) -> list:
        adv = msg.adv
        if adv.adv_id in self.srt:
            self._count("advertise_duplicate")
            return []
        width = self.topology.cluster_count
        if _is_client(sender):
            # Host broker: A_cxt vector; the host-cluster bit reflects local
            # interest already sitting in the PRT.
            civ = Civ(width, A_CXT, cb_index=self.id.ci)
            if any(overlaps(adv, e.subscription) for e in self.prt.values()):
                civ = civ.set_bit(self.id.ci)
            self.srt[adv.adv_id] = SrtEntry(adv, sender, civ)
            self._emit(ev="srt_add", broker=str(self.id), adv=adv.adv_id,
                       civ=civ.as_string(), ctx=civ.context)
            wire = Civ(width, S_CXT, cb_index=self.id.ci).set_bit(self.id.ci)
            return [
                Send(n, AdvertiseMsg(adv, wire, hops=msg.hops + 1))
                for n in self.topology.secondary_neighbours(self.id)
            ]
        # Secondary broker: store with the carried S_cxt vector and answer
        # with at most one interest announcement; never forward further.
        entry = SrtEntry(adv, sender, msg.civ)
        self.srt[adv.adv_id] = entry
        self._emit(ev="srt_add", broker=str(self.id), adv=adv.adv_id,
                   civ=entry.civ.as_string(), ctx=entry.civ.context)
        matching = sorted(
            (e.subscription for e in self.prt.values()
             if overlaps(adv, e.subscription)),
            key=lambda s: s.sub_id,
        )
        if matching:
            entry.civ = entry.civ.set_bit(self.id.ci)  # SCB on
            return [Send(sender, CibSetMsg(adv.adv_id, self.id.ci, matching[0], hops=1))]
        return []

    def _handle_cib_set(self, msg: CibSetMsg) -> list:
        entry = self.srt.get(msg.adv_id)
        if entry is None or entry.civ.context != A_CXT:
            self._count("cib_dropped")
            return []
        entry.civ = entry.civ.set_bit(msg.from_ci)
        self._emit(ev="cib_set", broker=str(self.id), adv=msg.adv_id,
                   ci=msg.from_ci, civ=entry.civ.as_string())
        return []

    def _handle_cib_clear(self, msg: CibClearMsg) -> list:
        entry = self.srt.get(msg.adv_id)
        if entry is None or entry.civ.context != A_CXT:
            self._count("cib_dropped")
            return []
        entry.civ = entry.civ.clear_bit(msg.from_ci)
        self._emit(ev="cib_clear", broker=str(self.id), adv=msg.adv_id,
                   ci=msg.from_ci, civ=entry.civ.as_string())
        return []

    # -- subscriptions -------------------------------------------------------

    def _handle_subscribe(self, msg: SubscribeMsg, sender) -> list:
        sub = msg.sub
        if sub.sub_id in self.prt:
            self._count("subscribe_duplicate")
            return []
        self.prt[sub.sub_id] = PrtEntry(sub, sender)
        self._emit(ev="prt_add", broker=str(self.id), sub=sub.sub_id)
        out = [
            Send(n, SubscribeMsg(sub, hops=msg.hops + 1))
            for n in self.topology.primary_neighbours(self.id)
            if n != sender
        ]
        for adv_id in sorted(self.srt):
            entry = self.srt[adv_id]
            if entry.civ.has(self.id.ci):
                continue  # interest already announced (or local bit already on)
            if not overlaps(entry.advertisement, sub):
                continue
            entry.civ = entry.civ.set_bit(self.id.ci)
            if entry.civ.context == S_CXT:
                out.append(Send(entry.last_hop, CibSetMsg(adv_id, self.id.ci, sub, hops=1)))
                self._emit(ev="scb_on", broker=str(self.id), adv=adv_id)
            else:  # A_cxt at the host broker: own cluster became a target
                self._emit(ev="host_bit_on", broker=str(self.id), adv=adv_id)
        return out

    def _handle_unsubscribe(self, msg: UnsubscribeMsg, sender) -> list:
        if msg.sub_id not in self.prt:
            self._count("unsubscribe_unknown")
            return []
        del self.prt[msg.sub_id]
        self._emit(ev="prt_remove", broker=str(self.id), sub=msg.sub_id)
        out = [
            Send(n, UnsubscribeMsg(msg.sub_id, hops=msg.hops + 1))
            for n in self.topology.primary_neighbours(self.id)
            if n != sender
        ]
        for adv_id in sorted(self.srt):
            entry = self.srt[adv_id]
            if not entry.civ.has(self.id.ci):
                continue
            if any(overlaps(entry.advertisement, e.subscription)
                   for e in self.prt.values()):
                continue  # another local subscription still overlaps
            entry.civ = entry.civ.clear_bit(self.id.ci)
            if entry.civ.context == S_CXT:
                out.append(Send(entry.last_hop, CibClearMsg(adv_id, self.id.ci, hops=1)))
                self._emit(ev="scb_off", broker=str(self.id), adv=adv_id)
            else:
                self._emit(ev="host_bit_off", broker=str(self.id), adv=adv_id)
        return out

    # -- notification routing -------------------------------------------------

    def _route(self, n: Notification, sender, now: float) -> list:
        self._bump_gamma(now)
        if _is_client(sender):
            return self._route_from_host(n, sender, now)
        return self._route_forwarded(n, sender, now)

    def _bump_gamma(self, now: float) -> None:
        ws = math.floor(now / self.t_w) * self.t_w
        if ws > self._gamma_window:
            self._gamma_window = ws
            self._gamma = 0
        self._gamma += 1

    def _local_and_rpf(self, n: Notification, exclude):
        """Local deliveries plus the distinct reverse-path aLink targets for
        this payload (at most one copy per link)."""
        deliveries = []
        targets = set()
        for sub_id in sorted(self.prt):
            entry = self.prt[sub_id]
            if not payload_satisfies(entry.subscription.predicates, n.payload):
                continue
            if _is_client(entry.last_hop):
                deliveries.append(Deliver(entry.last_hop, n))
            elif entry.last_hop != exclude:
                targets.add(entry.last_hop)
        return deliveries, sorted(targets)

    def _route_from_host(self, n: Notification, publisher: str, now: float) -> list:
        matching = [
            e for _, e in sorted(self.srt.items())
            if e.civ.context == A_CXT and e.last_hop == publisher
            and payload_satisfies(e.advertisement.predicates, n.payload)
        ]
        if not matching:
            raise RoutingError(
                f"{self.id}: notification {n.notif_id} from {publisher} matches "
                f"no stored advertisement"
            )
        target_cis = sorted({
            ci for e in matching for ci in e.civ.set_indexes() if ci != self.id.ci
        })
        deliveries, alink_targets = self._local_and_rpf(n, exclude=None)
        ilink_targets = [
            self.topology.secondary_in_cluster(self.id, ci) for ci in target_cis
        ]
        if self.routing == "idr":
            sends = self._idr_host_sends(n, alink_targets, ilink_targets, now)
        else:
            sends = [Send(d, n.forwarded()) for d in alink_targets + ilink_targets]
        return deliveries + sends

    def _least_loaded(self, candidates):
        return min(candidates, key=lambda d: (self.lst[d].q_len, d))

    def _pcxt(self, cis, like: Civ | None = None) -> Civ | None:
        if not cis:
            return None
        cb = like.cb_index if like is not None else self.id.ci
        civ = Civ(self.topology.cluster_count, P_CXT, cb_index=cb)
        for i in cis:
            civ = civ.set_bit(i)
        return civ

    def _idr_host_sends(self, n, alink_targets, ilink_targets, now) -> list:
        congested = [d for d in ilink_targets if self.link_congested(d, now)]
        clear = [d for d in ilink_targets if not self.link_congested(d, now)]
        stats = RoutingStepStats(
            alpha=len(alink_targets), beta=len(ilink_targets),
            theta=len(clear), ol=len(congested), gamma=self._gamma,
        )
        if not congested:
            self._trace_route(n, "static", stats, None)
            return [Send(d, n.forwarded()) for d in alink_targets + ilink_targets]

        skipped_bits = sorted(d.ci for d in congested)
        if clear:
            # Case (i): skip every congested target iLink; their bits ride the
            # copy on the least-loaded unoverloaded target iLink.
            carrier = self._least_loaded(clear)
            civ = self._pcxt(skipped_bits)
            self._trace_route(n, "skip-congested-ilinks", stats, civ)
            sends = [Send(d, n.forwarded()) for d in alink_targets]
            sends += [
                Send(d, n.forwarded(civ if d == carrier else None)) for d in clear
            ]
            return sends

        unov_alinks = [d for d in alink_targets if not self.link_congested(d, now)]
        if unov_alinks:
            # Case (ii): every target iLink is overloaded; hand the whole
            # inter-cluster job to the least-loaded unoverloaded target aLink.
            carrier = self._least_loaded(unov_alinks)
            civ = self._pcxt(skipped_bits)
            self._trace_route(n, "detour-via-alink", stats, civ)
            return [
                Send(d, n.forwarded(civ if d == carrier else None))
                for d in alink_targets
            ]

        # Case (iv): no unoverloaded target link at all; push one copy onto
        # the least overloaded target iLink, remaining bits riding along.
        target = self._least_loaded(congested)
        rest = [ci for ci in skipped_bits if ci != target.ci]
        civ = self._pcxt(rest)
        self._count("forced_congested_send")
        self._trace_route(n, "forced-congested-send", stats, civ)
        sends = [Send(d, n.forwarded()) for d in alink_targets]
        sends.append(Send(target, n.forwarded(civ)))
        return sends

    def _route_forwarded(self, n: Notification, sender: BrokerId, now: float) -> list:
        deliveries, alink_targets = self._local_and_rpf(n, exclude=sender)
        civ = n.civ
        if civ is None or not civ.any_set():
            sends = [Send(d, n.forwarded()) for d in alink_targets]
            return deliveries + sends

        # CIV-notification: residual bits take precedence over the PRT for
        # iLink decisions.  Serve each still-owed cluster over this broker's
        # own region link when unoverloaded; the rest ride onward.
        residual = []
        ilink_sends = []
        for ci in civ.set_indexes():
            if ci == self.id.ci:
                continue  # this copy's arrival already served our cluster
            d = self.topology.secondary_in_cluster(self.id, ci)
            if self.link_congested(d, now):
                residual.append(ci)
            else:
                ilink_sends.append(Send(d, n.forwarded()))

        carrier = None
        carrier_civ = None
        forced = []
        if residual:
            if alink_targets:
                unov = [d for d in alink_targets if not self.link_congested(d, now)]
                carrier = self._least_loaded(unov or alink_targets)
                carrier_civ = self._pcxt(residual, like=civ)
                self._emit(ev="civ_relay", broker=str(self.id), notif=n.notif_id,
                           via=str(carrier), civ=carrier_civ.as_string())
            else:
                cands = [self.topology.secondary_in_cluster(self.id, ci) for ci in residual]
                target = self._least_loaded(cands)
                rest = [ci for ci in residual if ci != target.ci]
                self._count("forced_congested_send")
                self._emit(ev="forced_send", broker=str(self.id), notif=n.notif_id,
                           via=str(target))
                forced.append(Send(target, n.forwarded(self._pcxt(rest, like=civ))))

        sends = [
            Send(d, n.forwarded(carrier_civ if d == carrier else None))
            for d in alink_targets
        ]
        return deliveries + sends + ilink_sends + forced

    def _trace_route(self, n, case, stats: RoutingStepStats, civ) -> None:
        self._emit(
            ev="route", broker=str(self.id), notif=n.notif_id, case=case,
            alpha=stats.alpha, beta=stats.beta, theta=stats.theta,
            ol=stats.ol, gamma=stats.gamma,
            civ=civ.as_string() if civ is not None else None,
        )
