"""Flooding baseline: tree-id advertisement broadcast with duplicate
discard, tree-bound subscription forwarding, and tree-tagged notification
routing on the unclustered view of the same overlay graph.

Every broker floods advertisements to all neighbours; the first receipt is
stored (with the advertisement's tree id) and repeats are discarded but
counted.  Subscriptions retrace matching advertisement trees toward their
roots, binding the tree ids they travel for; notifications carry the tree id
stamped at the publisher's host broker and follow the bound entries in
reverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .messages import (
    FillerMsg,
    Notification,
    TidAdvertiseMsg,
    TidSubscribeMsg,
    overlaps,
    payload_satisfies,
)
from .broker import BrokerCore, Deliver, RoutingError, Send, _is_client


@dataclass
class TidSrtEntry:
    advertisement: object
    last_hop: object
    tid: str


@dataclass
class TidPrtEntry:
    subscription: object
    last_hop: object
    bound_tids: set = field(default_factory=set)


class TidBroker(BrokerCore):
    """Baseline broker; routes on all product neighbours (no cluster
    structure is consulted)."""

    def __init__(self, broker_id, topology, tau=10.0, t_w=50.0,
                 counters=None, trace=None):
        super().__init__(broker_id, topology, tau, t_w, counters, trace)
        self.srt: dict[str, TidSrtEntry] = {}
        # Keyed by (sub_id, last_hop): one subscription may be stored per
        # distinct arrival path (different tree ids, different last hops).
        self.prt: dict[tuple, TidPrtEntry] = {}

    # -- client entry points -------------------------------------------------

    def client_advertise(self, adv, now: float = 0.0) -> list:
        return self._handle_advertise(adv, f"T/{adv.adv_id}", adv.publisher, hops=0)

    def client_subscribe(self, sub, now: float = 0.0) -> list:
        return self._handle_subscribe(sub, None, sub.subscriber, hops=0)

    def client_unsubscribe(self, sub_id, client, now: float = 0.0) -> list:
        raise NotImplementedError("the flooding baseline does not model unsubscribe")

    def client_publish(self, n: Notification, now: float) -> list:
        matching = [
            e for _, e in sorted(self.srt.items())
            if e.last_hop == n.publisher
            and payload_satisfies(e.advertisement.predicates, n.payload)
        ]
        if not matching:
            raise RoutingError(
                f"{self.id}: notification {n.notif_id} from {n.publisher} matches "
                f"no stored advertisement"
            )
        stamped = replace(n, tid=matching[0].tid)
        return self._route(stamped, n.publisher)

    # -- wire dispatch ---------------------------------------------------------

    def handle(self, msg, sender, now: float) -> list:
        if isinstance(msg, TidAdvertiseMsg):
            return self._handle_advertise(msg.adv, msg.tid, sender, msg.hops)
        if isinstance(msg, TidSubscribeMsg):
            return self._handle_subscribe(msg.sub, msg.tids, sender, msg.hops)
        if isinstance(msg, Notification):
            return self._route(msg, sender)
        if isinstance(msg, FillerMsg):
            return []
        raise TypeError(f"baseline broker cannot handle {type(msg).__name__}")

    # -- protocol ---------------------------------------------------------------

    def _handle_advertise(self, adv, tid, sender, hops) -> list:
        if adv.adv_id in self.srt:
            self._count("tid_duplicate_discard")
            return []
        self.srt[adv.adv_id] = TidSrtEntry(adv, sender, tid)
        self._emit(ev="tid_srt_add", broker=str(self.id), adv=adv.adv_id, tid=tid)
        return [
            Send(n, TidAdvertiseMsg(adv, tid, hops=hops + 1))
            for n in self.topology.all_neighbours(self.id)
            if n != sender
        ]

    def _handle_subscribe(self, sub, tids, sender, hops) -> list:
        if tids is None:
            matched = [
                e for _, e in sorted(self.srt.items())
                if overlaps(e.advertisement, sub)
            ]
        else:
            wanted = set(tids)
            matched = [
                e for _, e in sorted(self.srt.items()) if e.tid in wanted
            ]
        key = (sub.sub_id, sender)
        entry = self.prt.get(key)
        bound = {e.tid for e in matched}
        if entry is None:
            entry = TidPrtEntry(sub, sender, set(bound))
            self.prt[key] = entry
            self._emit(ev="tid_prt_add", broker=str(self.id), sub=sub.sub_id,
                       tids=sorted(bound))
        else:
            fresh = bound - entry.bound_tids
            if not fresh:
                self._count("tid_subscribe_duplicate")
                return []
            entry.bound_tids |= fresh
        # Forward one copy per distinct upstream last hop of the matched
        # advertisement trees; tree roots (client last hops) end the walk.
        groups: dict = {}
        for e in matched:
            if not _is_client(e.last_hop):
                groups.setdefault(e.last_hop, set()).add(e.tid)
        return [
            Send(dst, TidSubscribeMsg(sub, tuple(sorted(groups[dst])), hops=hops + 1))
            for dst in sorted(groups)
        ]

    def _route(self, n: Notification, sender) -> list:
        deliveries = []
        targets = set()
        for key in sorted(self.prt, key=lambda k: (k[0], str(k[1]))):
            entry = self.prt[key]
            if n.tid not in entry.bound_tids:
                continue
            if not payload_satisfies(entry.subscription.predicates, n.payload):
                continue
            if _is_client(entry.last_hop):
                deliveries.append(Deliver(entry.last_hop, n))
            elif entry.last_hop != sender:
                targets.add(entry.last_hop)
        if not deliveries and not targets and not _is_client(sender):
            self._count("tid_unrouted")
        sends = [Send(d, n.forwarded()) for d in sorted(targets)]
        return deliveries + sends
