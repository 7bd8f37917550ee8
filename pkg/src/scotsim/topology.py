"""Clustered product overlay: validation, construction, broker classification.

The overlay is the Cartesian product of a connected acyclic factor (left)
and a complete factor with integer labels (right).  One copy of the acyclic
factor per right-factor vertex is a *cluster*; one copy of the complete
factor per left-factor vertex is a *region*.  Links inside a cluster are
aLinks, links inside a region are iLinks.  The topology is immutable after
construction and shareable across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graphs import (
    Graph,
    GraphError,
    ProductVertex,
    build_graph,
    cartesian_product,
    diameter,
    _canon_edge,
)


class ScotValidationError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        details = "; ".join(str(v) for v in self.violations)
        super().__init__(f"factor validation failed: {details}")


@dataclass(frozen=True, order=True)
class BrokerId:
    """Broker label ``(af_label, ci)``: acyclic-factor vertex first, then the
    cluster index."""

    af_label: str
    ci: int

    def __str__(self) -> str:
        return f"({self.af_label},{self.ci})"


def parse_broker(text: str) -> BrokerId:
    """Parse the ``(a,0)`` rendering back into a :class:`BrokerId`."""
    s = text.strip()
    if not (s.startswith("(") and s.endswith(")")) or "," not in s:
        raise ValueError(f"not a broker label: {text!r}")
    label, _, idx = s[1:-1].rpartition(",")
    return BrokerId(label.strip(), int(idx))


@dataclass(frozen=True)
class Violation:
    prop: str  # "acyclic" | "connectivity" | "index" | "label-order"
    detail: str

    def __str__(self) -> str:
        return f"{self.prop}: {self.detail}"


@dataclass(frozen=True)
class NeighbourInfo:
    primary: tuple    # same-cluster adjacent brokers
    secondary: tuple  # same-region adjacent brokers
    broker_class: str  # "edge" (<=1 primary) | "inner" (>=2 primary)


def _cf_indices(g_cf: Graph):
    """Map cf labels to ints if they form the sequence 0..n-1, else None."""
    try:
        idx = {lbl: int(lbl) for lbl in g_cf.vertices}
    except ValueError:
        return None
    if sorted(idx.values()) != list(range(g_cf.order)):
        return None
    return idx


def _acyclic_factor_ok(g: Graph) -> bool:
    return g.order > 0 and g.is_connected() and g.is_acyclic()


def _connectivity_factor_ok(g: Graph) -> bool:
    return g.order > 0 and g.is_complete() and _cf_indices(g) is not None


def validate_factors(g_af: Graph, g_cf: Graph) -> list[Violation]:
    """Check the four structural properties of an overlay's factors.

    Returns the (possibly empty) list of violations instead of raising, so
    callers can report every problem at once.
    """
    violations = []
    if g_af.order == 0:
        violations.append(Violation("acyclic", "acyclic factor is empty"))
    else:
        if not g_af.is_connected():
            violations.append(Violation("acyclic", "acyclic factor must be connected"))
        if not g_af.is_acyclic():
            violations.append(Violation("acyclic", "acyclic factor contains a cycle"))
    if g_cf.order == 0:
        violations.append(Violation("connectivity", "connectivity factor is empty"))
    elif not g_cf.is_complete():
        violations.append(Violation("connectivity", "connectivity factor must be complete"))
    if g_cf.order > 0 and _cf_indices(g_cf) is None:
        violations.append(
            Violation("index", "connectivity-factor labels must be the integers 0..n-1")
        )
    if violations and _acyclic_factor_ok(g_cf) and _connectivity_factor_ok(g_af):
        violations.append(
            Violation("label-order", "factors appear swapped: the left operand must be the acyclic factor")
        )
    return violations


class ScotTopology:
    """The built overlay: brokers, clusters, regions, aLinks and iLinks.

    Use :func:`build_scot`.  Undirected links are stored canonically; message
    routing treats each direction's output queue independently.
    """

    def __init__(self, g_af: Graph, g_cf: Graph):
        violations = validate_factors(g_af, g_cf)
        if violations:
            raise ScotValidationError(violations)
        self.g_af = g_af
        self.g_cf = g_cf
        cf_idx = _cf_indices(g_cf)
        self.cluster_indices = tuple(sorted(cf_idx.values()))

        self.brokers = tuple(
            sorted(BrokerId(a, i) for a in g_af.vertices for i in self.cluster_indices)
        )
        self._broker_set = set(self.brokers)

        alinks = set()
        for ci in self.cluster_indices:
            for (u, v) in g_af.edges:
                alinks.add(_canon_edge(BrokerId(u, ci), BrokerId(v, ci)))
        ilinks = set()
        for a in g_af.vertices:
            for (x, y) in g_cf.edges:
                ilinks.add(_canon_edge(BrokerId(a, cf_idx[x]), BrokerId(a, cf_idx[y])))
        self.alinks = tuple(sorted(alinks))
        self.ilinks = tuple(sorted(ilinks))

        self.clusters = {
            ci: tuple(sorted(b for b in self.brokers if b.ci == ci))
            for ci in self.cluster_indices
        }
        self.regions = {
            a: tuple(sorted(b for b in self.brokers if b.af_label == a))
            for a in g_af.vertices
        }
        self.diam_af = diameter(g_af)

        primary: dict[BrokerId, list] = {b: [] for b in self.brokers}
        for (u, v) in self.alinks:
            primary[u].append(v)
            primary[v].append(u)
        secondary: dict[BrokerId, list] = {b: [] for b in self.brokers}
        for (u, v) in self.ilinks:
            secondary[u].append(v)
            secondary[v].append(u)
        self._primary = {b: tuple(sorted(ns)) for b, ns in primary.items()}
        self._secondary = {b: tuple(sorted(ns)) for b, ns in secondary.items()}
        self._secondary_by_ci = {
            b: {n.ci: n for n in ns} for b, ns in self._secondary.items()
        }

        # The fiber construction must agree with the product definition.
        product = cartesian_product(g_af, g_cf)
        built_edges = {
            _canon_edge(ProductVertex(u.af_label, u.ci), ProductVertex(v.af_label, v.ci))
            for (u, v) in self.alinks + self.ilinks
        }
        if built_edges != set(product.edges) or len(self.brokers) != product.order:
            raise AssertionError("fiber construction diverged from the product adjacency")

    # -- lookups ----------------------------------------------------------

    @property
    def cluster_count(self) -> int:
        return len(self.cluster_indices)

    def has_broker(self, b: BrokerId) -> bool:
        return b in self._broker_set

    def _check(self, b: BrokerId) -> None:
        if b not in self._broker_set:
            raise GraphError(f"unknown broker {b}")

    def primary_neighbours(self, b: BrokerId) -> tuple:
        self._check(b)
        return self._primary[b]

    def secondary_neighbours(self, b: BrokerId) -> tuple:
        self._check(b)
        return self._secondary[b]

    def secondary_in_cluster(self, b: BrokerId, ci: int) -> BrokerId:
        """The unique same-region broker of ``b`` living in cluster ``ci``."""
        self._check(b)
        try:
            return self._secondary_by_ci[b][ci]
        except KeyError:
            raise GraphError(f"{b} has no secondary neighbour in cluster {ci}") from None

    def all_neighbours(self, b: BrokerId) -> tuple:
        """Primary plus secondary neighbours; the unclustered view of the
        same overlay graph (what the flooding baseline routes on)."""
        self._check(b)
        return tuple(sorted(self._primary[b] + self._secondary[b]))

    def neighbours(self, b: BrokerId) -> NeighbourInfo:
        self._check(b)
        primary = self._primary[b]
        cls = "edge" if len(primary) <= 1 else "inner"
        return NeighbourInfo(primary, self._secondary[b], cls)

    def directed_links(self) -> tuple:
        out = []
        for (u, v) in self.alinks + self.ilinks:
            out.append((u, v))
            out.append((v, u))
        return tuple(sorted(out))

    def is_ilink(self, src: BrokerId, dst: BrokerId) -> bool:
        return src.af_label == dst.af_label

    def __eq__(self, other) -> bool:
        if not isinstance(other, ScotTopology):
            return NotImplemented
        return (
            self.brokers == other.brokers
            and self.alinks == other.alinks
            and self.ilinks == other.ilinks
        )


def build_scot(g_af: Graph, g_cf: Graph) -> ScotTopology:
    """Validate the factors and build the overlay (deterministic: identical
    factors give identical topologies, label for label)."""
    return ScotTopology(g_af, g_cf)


# -- stock factor graphs and presets --------------------------------------

def h_graph() -> Graph:
    """Six-vertex H-shaped tree used by the 18-broker preset."""
    return build_graph("abcdef", [("a", "b"), ("b", "c"), ("b", "d"), ("d", "e"), ("e", "f")])


def path_graph(labels) -> Graph:
    labels = [str(x) for x in labels]
    return build_graph(labels, list(zip(labels, labels[1:])))


def complete_graph(n: int) -> Graph:
    labels = [str(i) for i in range(n)]
    return build_graph(
        labels, [(labels[i], labels[j]) for i in range(n) for j in range(i + 1, n)]
    )


def star_tree_14() -> Graph:
    """The 14-vertex evaluation tree: a 6-vertex spine E-F-G-H-I-J with two
    leaves hanging off each of the four inner spine vertices."""
    vertices = "ABCDEFGHIJKLMN"
    edges = [
        ("E", "F"), ("F", "G"), ("G", "H"), ("H", "I"), ("I", "J"),
        ("A", "F"), ("K", "F"),
        ("B", "G"), ("L", "G"),
        ("C", "H"), ("M", "H"),
        ("D", "I"), ("N", "I"),
    ]
    return build_graph(vertices, edges)


PRESETS = {
    "fig3": lambda: (h_graph(), complete_graph(3)),
    "fig7": lambda: (path_graph("abc"), complete_graph(3)),
    "fig10": lambda: (star_tree_14(), complete_graph(5)),
}


def preset_factors(name: str) -> tuple[Graph, Graph]:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(
            f"unknown topology preset {name!r} (have: {', '.join(sorted(PRESETS))})"
        ) from None


def build_preset(name: str) -> ScotTopology:
    return build_scot(*preset_factors(name))
