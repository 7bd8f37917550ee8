import itertools
import random
from collections import deque

import pytest

from scotsim.broker import Deliver, ScotBroker, Send
from scotsim.baseline import TidBroker
from scotsim.graphs import Graph, build_graph


class SyncPump:
    """Synchronous FIFO message pump for handler-level protocol tests.

    No queues, latency or clocks: every send is handled immediately in FIFO
    order.  Records all broker-to-broker sends and client deliveries.
    """

    def __init__(self, topology, routing: str = "snr"):
        self.topology = topology
        if routing == "tid-static":
            self.brokers = {b: TidBroker(b, topology) for b in topology.brokers}
        else:
            self.brokers = {
                b: ScotBroker(b, topology, routing=routing) for b in topology.brokers
            }
        self.sends = []       # (src, dst, msg)
        self.deliveries = []  # (client, notif)

    def _drain(self, src, actions):
        fifo = deque((src, act) for act in actions)
        while fifo:
            origin, act = fifo.popleft()
            if isinstance(act, Deliver):
                self.deliveries.append((act.client, act.notif))
                continue
            assert isinstance(act, Send)
            self.sends.append((origin, act.dst, act.msg))
            follow = self.brokers[act.dst].handle(act.msg, origin, now=0.0)
            fifo.extend((act.dst, a) for a in follow)

    def advertise(self, broker_id, adv):
        self._drain(broker_id, self.brokers[broker_id].client_advertise(adv))

    def subscribe(self, broker_id, sub):
        self._drain(broker_id, self.brokers[broker_id].client_subscribe(sub))

    def unsubscribe(self, broker_id, sub_id, client):
        self._drain(broker_id, self.brokers[broker_id].client_unsubscribe(sub_id, client))

    def publish(self, broker_id, notif):
        self._drain(broker_id, self.brokers[broker_id].client_publish(notif, now=0.0))

    def sends_of_kind(self, cls):
        return [(s, d, m) for (s, d, m) in self.sends if isinstance(m, cls)]


def random_connected_graph(rng: random.Random, n: int, extra_edges: int = 0,
                           labels=None) -> Graph:
    """Random connected graph: a random spanning tree plus extra edges."""
    labels = [str(i) for i in range(n)] if labels is None else list(labels)
    rng.shuffle(labels)
    edges = set()
    for i in range(1, n):
        j = rng.randrange(i)
        u, v = labels[i], labels[j]
        edges.add((u, v) if u <= v else (v, u))
    candidates = [
        (a, b) for a, b in itertools.combinations(sorted(labels), 2)
        if (a, b) not in edges
    ]
    rng.shuffle(candidates)
    edges.update(candidates[:extra_edges])
    return build_graph(sorted(labels), sorted(edges))


# -- independent brute-force oracles (no scotsim.graphs internals) -----------

def bf_connected(vertices, edges) -> bool:
    vertices = list(vertices)
    if not vertices:
        return False
    adj = {v: set() for v in vertices}
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    seen = {vertices[0]}
    stack = [vertices[0]]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == len(vertices)


def bf_min_vertex_cut(vertices, edges) -> int:
    vertices = list(vertices)
    n = len(vertices)
    for k in range(0, n - 1):
        for cut in itertools.combinations(vertices, k):
            removed = set(cut)
            rest = [v for v in vertices if v not in removed]
            rest_edges = [
                (u, v) for u, v in edges if u not in removed and v not in removed
            ]
            if len(rest) >= 2 and not bf_connected(rest, rest_edges):
                return k
    return n - 1


def bf_min_edge_cut(vertices, edges) -> int:
    edges = list(edges)
    for k in range(0, len(edges) + 1):
        for cut in itertools.combinations(range(len(edges)), k):
            removed = set(cut)
            rest_edges = [e for i, e in enumerate(edges) if i not in removed]
            if not bf_connected(vertices, rest_edges):
                return k
    return len(edges)


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
