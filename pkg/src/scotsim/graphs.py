"""Undirected-graph primitives used to build and validate product overlays.

Vertices are opaque string labels; edges are canonical unordered pairs.
Graphs are immutable values, so every operation here is a pure function and
safe to call from any thread.  Factor graphs in this project are small by
construction (at most a few dozen vertices), which is why the connectivity
numbers are computed by exhaustive cut search instead of flow algorithms.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from functools import cached_property


class GraphError(ValueError):
    """Malformed graph construction or an invalid structural query."""


@dataclass(frozen=True, order=True)
class ProductVertex:
    """Vertex of a product graph: left-factor label first, then the integer
    label of the right factor (component order is fixed)."""

    af_label: str
    cf_index: int

    def __post_init__(self) -> None:
        if self.cf_index < 0:
            raise GraphError(f"cf_index must be >= 0, got {self.cf_index}")

    def __str__(self) -> str:
        return f"({self.af_label},{self.cf_index})"


def _canon_edge(u, v):
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Finite simple undirected graph.

    ``vertices`` is a sorted tuple of labels and ``edges`` a sorted tuple of
    canonical ``(u, v)`` pairs with ``u < v``.  Use :func:`build_graph` rather
    than the constructor so the invariants (no self-loops, no dangling
    endpoints, canonical edge set) are enforced.
    """

    vertices: tuple
    edges: tuple

    @cached_property
    def adjacency(self) -> dict:
        adj = {v: [] for v in self.vertices}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return {v: tuple(sorted(ns)) for v, ns in adj.items()}

    @property
    def order(self) -> int:
        return len(self.vertices)

    @property
    def size(self) -> int:
        return len(self.edges)

    def neighbours(self, v) -> tuple:
        if v not in self.adjacency:
            raise GraphError(f"unknown vertex {v!r}")
        return self.adjacency[v]

    def degree(self, v) -> int:
        return len(self.neighbours(v))

    def min_degree(self) -> int:
        return min(len(ns) for ns in self.adjacency.values())

    def max_degree(self) -> int:
        return max(len(ns) for ns in self.adjacency.values())

    def has_edge(self, u, v) -> bool:
        return _canon_edge(u, v) in set(self.edges)

    def distances_from(self, src) -> dict:
        """BFS hop distances from ``src`` to every reachable vertex."""
        if src not in self.adjacency:
            raise GraphError(f"unknown vertex {src!r}")
        dist = {src: 0}
        frontier = deque([src])
        while frontier:
            u = frontier.popleft()
            for w in self.adjacency[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    frontier.append(w)
        return dist

    def is_connected(self) -> bool:
        if self.order == 0:
            return False
        return len(self.distances_from(self.vertices[0])) == self.order

    def component_count(self) -> int:
        seen: set = set()
        count = 0
        for v in self.vertices:
            if v not in seen:
                seen.update(self.distances_from(v))
                count += 1
        return count

    def is_acyclic(self) -> bool:
        # A simple undirected graph is a forest iff |E| = |V| - #components.
        return self.size == self.order - self.component_count()

    def is_complete(self) -> bool:
        n = self.order
        return self.size == n * (n - 1) // 2


def build_graph(vertex_labels, edge_pairs) -> Graph:
    """Build a canonical :class:`Graph` from labels and unordered edge pairs.

    Raises :class:`GraphError` on duplicate vertex labels, edge endpoints
    that are not declared vertices, or self-loops.  Duplicate edges (in
    either orientation) collapse silently into the canonical edge set.
    """
    labels = [str(x) for x in vertex_labels]
    if len(set(labels)) != len(labels):
        dupes = sorted({x for x in labels if labels.count(x) > 1})
        raise GraphError(f"duplicate vertex label(s): {', '.join(dupes)}")
    vertex_set = set(labels)
    edges = set()
    for pair in edge_pairs:
        u, v = (str(pair[0]), str(pair[1]))
        if u == v:
            raise GraphError(f"self-loop on vertex {u!r}")
        if u not in vertex_set or v not in vertex_set:
            missing = u if u not in vertex_set else v
            raise GraphError(f"edge endpoint {missing!r} is not a declared vertex")
        edges.add(_canon_edge(u, v))
    return Graph(tuple(sorted(labels)), tuple(sorted(edges)))


def cartesian_product(g: Graph, h: Graph) -> Graph:
    """Cartesian product of two graphs.

    Vertices are all ``(g_label, h_index)`` pairs; ``(u, x)`` and ``(v, y)``
    are adjacent iff ``u == v`` and ``xy`` is an edge of ``h``, or ``uv`` is
    an edge of ``g`` and ``x == y``.  The right factor's labels must parse as
    non-negative integers (they become :class:`ProductVertex.cf_index`).
    """
    if g.order == 0 or h.order == 0:
        raise GraphError("cannot take the product of an empty factor graph")
    try:
        cf = {lbl: int(lbl) for lbl in h.vertices}
    except ValueError as exc:
        raise GraphError(
            "right-factor labels must be integers (got a non-integer label)"
        ) from exc
    if any(i < 0 for i in cf.values()):
        raise GraphError("right-factor labels must be >= 0")

    vertices = [
        ProductVertex(a, cf[b]) for a in g.vertices for b in h.vertices
    ]
    edges = set()
    for (u, v) in g.edges:
        for b in h.vertices:
            edges.add(_canon_edge(ProductVertex(u, cf[b]), ProductVertex(v, cf[b])))
    for (x, y) in h.edges:
        for a in g.vertices:
            edges.add(_canon_edge(ProductVertex(a, cf[x]), ProductVertex(a, cf[y])))
    return Graph(tuple(sorted(vertices)), tuple(sorted(edges)))


def diameter(g: Graph) -> int:
    """Longest shortest-path length over all vertex pairs; errors if ``g``
    is disconnected (an overlay factor must be connected anyway)."""
    if g.order == 0:
        raise GraphError("diameter of an empty graph is undefined")
    best = 0
    for v in g.vertices:
        dist = g.distances_from(v)
        if len(dist) != g.order:
            raise GraphError("diameter is undefined for a disconnected graph")
        best = max(best, max(dist.values()))
    return best


def _connected_without_vertices(g: Graph, removed: set) -> bool:
    remaining = [v for v in g.vertices if v not in removed]
    if len(remaining) <= 1:
        return True
    adj = {
        v: [w for w in g.adjacency[v] if w not in removed] for v in remaining
    }
    seen = {remaining[0]}
    frontier = deque([remaining[0]])
    while frontier:
        u = frontier.popleft()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                frontier.append(w)
    return len(seen) == len(remaining)


def _connected_without_edges(g: Graph, removed: set) -> bool:
    adj = {v: [] for v in g.vertices}
    for (u, v) in g.edges:
        if (u, v) in removed:
            continue
        adj[u].append(v)
        adj[v].append(u)
    start = g.vertices[0]
    seen = {start}
    frontier = deque([start])
    while frontier:
        u = frontier.popleft()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                frontier.append(w)
    return len(seen) == g.order


def vertex_connectivity(g: Graph) -> int:
    """Exact vertex connectivity by exhaustive cut enumeration.

    Complete graphs short-circuit to ``n - 1`` (no separating set exists).
    Intended for the small factor graphs of this project.
    """
    if g.order < 2:
        raise GraphError("vertex connectivity needs at least 2 vertices")
    if not g.is_connected():
        return 0
    if g.is_complete():
        return g.order - 1
    for k in range(1, g.order - 1):
        for removed in itertools.combinations(g.vertices, k):
            if not _connected_without_vertices(g, set(removed)):
                return k
    return g.order - 1


def edge_connectivity(g: Graph) -> int:
    """Exact edge connectivity by exhaustive cut enumeration (lambda <= delta
    bounds the search depth)."""
    if g.order < 2:
        raise GraphError("edge connectivity needs at least 2 vertices")
    if not g.is_connected():
        return 0
    upper = g.min_degree()
    for k in range(1, upper):
        for removed in itertools.combinations(g.edges, k):
            if not _connected_without_edges(g, set(removed)):
                return k
    return upper


def connectivity_bounds(g: Graph, h: Graph) -> tuple[int, int]:
    """Vertex/edge connectivity of the product from the factor values:

    ``kappa = min(kappa(G)*|H|, |G|*kappa(H), delta(G)+delta(H))`` and the
    analogous formula for ``lambda``.  Both factors must be connected and
    have at least 2 vertices.
    """
    for name, f in (("left", g), ("right", h)):
        if f.order < 2:
            raise GraphError(f"{name} factor must have at least 2 vertices")
        if not f.is_connected():
            raise GraphError(f"{name} factor must be connected")
    dsum = g.min_degree() + h.min_degree()
    kappa = min(vertex_connectivity(g) * h.order, g.order * vertex_connectivity(h), dsum)
    lam = min(edge_connectivity(g) * h.order, g.order * edge_connectivity(h), dsum)
    return kappa, lam


def parse_graph_text(text: str) -> Graph:
    """Parse the edge-list text format: one edge per line as ``u v``.

    Vertices are inferred from edges; a line with a single token declares an
    isolated vertex.  Blank lines and ``#`` comments are ignored.
    """
    vertices: list = []
    seen: set = set()
    edges = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) > 2:
            raise GraphError(f"line {lineno}: expected 'u v' or a single vertex, got {raw!r}")
        for t in tokens:
            if t not in seen:
                seen.add(t)
                vertices.append(t)
        if len(tokens) == 2:
            edges.append((tokens[0], tokens[1]))
    return build_graph(vertices, edges)


def load_graph_file(path) -> Graph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph_text(fh.read())


def format_graph_text(g: Graph) -> str:
    lines = [f"{u} {v}" for (u, v) in g.edges]
    connected = {x for e in g.edges for x in e}
    lines.extend(v for v in g.vertices if v not in connected)
    return "\n".join(lines) + "\n"
