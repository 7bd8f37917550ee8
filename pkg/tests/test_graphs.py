import itertools
import random

import pytest

from conftest import bf_min_edge_cut, bf_min_vertex_cut, random_connected_graph
from scotsim.graphs import (
    Graph,
    GraphError,
    ProductVertex,
    build_graph,
    cartesian_product,
    connectivity_bounds,
    diameter,
    edge_connectivity,
    format_graph_text,
    load_graph_file,
    parse_graph_text,
    vertex_connectivity,
)
from scotsim.topology import h_graph, star_tree_14, complete_graph, path_graph


def triangle():
    return build_graph("012", [("0", "1"), ("1", "2"), ("0", "2")])


class TestBuildGraph:
    def test_path_of_three(self):
        g = build_graph("abc", [("a", "b"), ("b", "c")])
        assert g.order == 3 and g.size == 2
        assert g.neighbours("b") == ("a", "c")

    def test_triangle_is_complete(self):
        g = triangle()
        assert g.order == 3 and g.size == 3
        assert g.is_complete()

    def test_self_loop_rejected(self):
        with pytest.raises(GraphError, match="self-loop"):
            build_graph("a", [("a", "a")])

    def test_duplicate_vertex_rejected(self):
        with pytest.raises(GraphError, match="duplicate"):
            build_graph(["a", "a"], [])

    def test_dangling_endpoint_rejected(self):
        with pytest.raises(GraphError, match="not a declared vertex"):
            build_graph("ab", [("a", "z")])

    def test_edges_canonical(self):
        g = build_graph("ab", [("b", "a"), ("a", "b")])
        assert g.edges == (("a", "b"),)


class TestCartesianProduct:
    def test_h_graph_times_triangle_counts(self):
        p = cartesian_product(h_graph(), triangle())
        assert p.order == 18
        assert p.size == 5 * 3 + 6 * 3 == 33

    def test_single_vertex_factor_is_identity_like(self):
        g = h_graph()
        p = cartesian_product(g, build_graph(["0"], []))
        assert p.order == g.order and p.size == g.size

    def test_path2_squared_is_4_cycle(self):
        p2 = path_graph("01")
        p = cartesian_product(p2, p2)
        assert p.order == 4 and p.size == 4
        # every vertex has degree 2: a single cycle on 4 vertices
        assert all(p.degree(v) == 2 for v in p.vertices)

    def test_empty_factor_rejected(self):
        with pytest.raises(GraphError, match="empty factor"):
            cartesian_product(build_graph([], []), triangle())

    def test_non_integer_right_labels_rejected(self):
        with pytest.raises(GraphError, match="integer"):
            cartesian_product(triangle(), build_graph("ab", [("a", "b")]))

    def test_adjacency_matches_definition_on_random_factors(self):
        # product adjacency == the defining predicate, checked pairwise
        rng = random.Random(2024)
        for trial in range(100):
            n1, n2 = rng.randint(1, 6), rng.randint(1, 6)
            g = random_connected_graph(rng, n1, rng.randint(0, 3),
                                       labels=[f"v{i}" for i in range(n1)])
            h = random_connected_graph(rng, n2, rng.randint(0, 3))
            p = cartesian_product(g, h)
            edge_set = set(p.edges)
            g_edges = set(g.edges)
            h_edges = set(h.edges)
            for a, b in itertools.combinations(sorted(p.vertices), 2):
                want = (
                    a.af_label == b.af_label
                    and tuple(sorted((str(a.cf_index), str(b.cf_index)))) in h_edges
                ) or (
                    a.cf_index == b.cf_index
                    and tuple(sorted((a.af_label, b.af_label))) in g_edges
                )
                assert ((a, b) in edge_set) == want

    def test_count_identities_and_degree_additivity(self, rng):
        for _ in range(30):
            n1 = rng.randint(1, 6)
            g = random_connected_graph(rng, n1, rng.randint(0, 2),
                                       labels=[f"x{i}" for i in range(n1)])
            h = random_connected_graph(rng, rng.randint(1, 6), rng.randint(0, 2))
            p = cartesian_product(g, h)
            assert p.order == g.order * h.order
            assert p.size == g.size * h.order + g.order * h.size
            assert p.min_degree() == g.min_degree() + h.min_degree()

    def test_commutative_up_to_relabelling(self, rng):
        for _ in range(20):
            g = random_connected_graph(rng, rng.randint(2, 5), rng.randint(0, 2))
            h = random_connected_graph(rng, rng.randint(2, 5), rng.randint(0, 2))
            gh = cartesian_product(g, h)
            hg = cartesian_product(h, g)
            assert gh.order == hg.order and gh.size == hg.size
            assert sorted(gh.degree(v) for v in gh.vertices) == sorted(
                hg.degree(v) for v in hg.vertices
            )


class TestDiameter:
    def test_triangle(self):
        assert diameter(triangle()) == 1

    def test_h_graph(self):
        assert diameter(h_graph()) == 4

    def test_14_vertex_tree(self):
        assert diameter(star_tree_14()) == 5

    def test_disconnected_errors(self):
        g = build_graph("abcd", [("a", "b"), ("c", "d")])
        with pytest.raises(GraphError, match="disconnected"):
            diameter(g)


class TestConnectivity:
    def test_path2_triangle(self):
        assert connectivity_bounds(path_graph("01"), triangle()) == (3, 3)

    def test_h_graph_triangle(self):
        kappa, lam = connectivity_bounds(h_graph(), triangle())
        assert kappa == 3  # min(1*3, 6*2, 1+2)

    def test_path2_path2(self):
        assert connectivity_bounds(path_graph("01"), path_graph("01")) == (2, 2)

    def test_small_factor_rejected(self):
        with pytest.raises(GraphError, match="at least 2"):
            connectivity_bounds(build_graph(["0"], []), triangle())

    def test_complete_graph_connectivity(self):
        k5 = complete_graph(5)
        assert vertex_connectivity(k5) == 4
        assert edge_connectivity(k5) == 4

    def test_bounds_equal_brute_force_cuts_on_small_products(self, rng):
        shapes = [(2, 2), (2, 3), (3, 2), (2, 4), (4, 2), (3, 3)]
        for trial in range(20):
            n1, n2 = shapes[trial % len(shapes)]
            g = random_connected_graph(rng, n1, rng.randint(0, 2),
                                       labels=[f"g{i}" for i in range(n1)])
            h = random_connected_graph(rng, n2, rng.randint(0, 2))
            p = cartesian_product(g, h)
            kappa, lam = connectivity_bounds(g, h)
            assert kappa == bf_min_vertex_cut(p.vertices, p.edges)
            assert lam == bf_min_edge_cut(p.vertices, p.edges)


class TestTextFormat:
    def test_round_trip(self, tmp_path):
        g = h_graph()
        path = tmp_path / "g.txt"
        path.write_text(format_graph_text(g))
        assert load_graph_file(path) == g

    def test_comments_blanks_isolated(self):
        g = parse_graph_text("# factor\n\na b\nb c\nz\n")
        assert g.vertices == ("a", "b", "c", "z")
        assert g.size == 2

    def test_bad_line(self):
        with pytest.raises(GraphError, match="line 1"):
            parse_graph_text("a b c\n")


def test_product_vertex_rendering():
    assert str(ProductVertex("a", 2)) == "(a,2)"
    with pytest.raises(GraphError):
        ProductVertex("a", -1)
