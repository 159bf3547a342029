import itertools

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from graphon_lab import DomainError, InvalidEdgeError, StepGraphon
from graphon_lab.canonical import canonical_order, canonicalize, compare_reduced
from graphon_lab.distances import EXACT_CUT_MAX_BLOCKS, cut_distance_labeled, hom_metric
from graphon_lab.graphon import edge_density, l1_distance, triangle_density
from graphon_lab.graphs import (
    SimpleGraph,
    checkerboard,
    edge_count,
    toggle_edge_delta,
    triangle_count,
)

from strategies import step_graphons


@st.composite
def graphs(draw, max_n=8):
    n = draw(st.integers(2, max_n))
    pairs = list(itertools.combinations(range(1, n + 1), 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return SimpleGraph(n, [p for p, b in zip(pairs, mask) if b])


def _brute_cut(f, g):
    from graphon_lab.graphon import common_refinement

    b, F, G = common_refinement(f, g)
    w = np.diff(b)
    K = w[:, None] * (F - G) * w[None, :]
    m = K.shape[0]
    best = 0.0
    for S in itertools.product([0, 1], repeat=m):
        for T in itertools.product([0, 1], repeat=m):
            best = max(best, abs(np.array(S) @ K @ np.array(T)))
    return best


class TestSimpleGraph:
    def test_edges_are_one_indexed(self):
        G = SimpleGraph(3, [(1, 2), (3, 2)])
        assert G.edges == [(1, 2), (2, 3)]
        assert G.has_edge(2, 1)

    def test_invalid_edges(self):
        with pytest.raises(InvalidEdgeError):
            SimpleGraph(3, [(1, 1)])
        with pytest.raises(InvalidEdgeError):
            SimpleGraph(3, [(0, 2)])
        with pytest.raises(InvalidEdgeError):
            SimpleGraph(3, [(1, 4)])

    def test_from_adjacency_validates(self):
        with pytest.raises(DomainError):
            SimpleGraph.from_adjacency([[0, 1], [0, 0]])
        with pytest.raises(DomainError):
            SimpleGraph.from_adjacency([[1, 0], [0, 0]])

    def test_counts_complete_graph(self):
        G = SimpleGraph.complete(6)
        assert edge_count(G) == 15
        assert triangle_count(G) == 20

    @given(graphs())
    def test_json_round_trip(self, G):
        assert SimpleGraph.from_json(G.to_json()) == G

    @given(graphs(), st.data())
    def test_toggle_delta_matches_recount(self, G, data):
        i = data.draw(st.integers(1, G.n))
        j = data.draw(st.integers(1, G.n).filter(lambda x: x != i))
        dE, dT = toggle_edge_delta(G, i, j)
        H = G.toggled(i, j)
        assert edge_count(H) - edge_count(G) == dE
        assert triangle_count(H) - triangle_count(G) == dT

    @given(graphs())
    def test_checkerboard_densities(self, G):
        g = checkerboard(G)
        n = G.n
        assert edge_density(g) == pytest.approx(2 * edge_count(G) / n**2, abs=1e-12)
        assert triangle_density(g) == pytest.approx(6 * triangle_count(G) / n**3, abs=1e-12)


class TestCutDistance:
    def test_known_value(self):
        f = StepGraphon.constant(0.5, m=2)
        g = StepGraphon([0, 0.5, 1], [[1, 0], [0, 1]])
        # the diagonal blocks carry +1/8 each, the off-diagonal ones -1/8
        assert cut_distance_labeled(f, g).value == pytest.approx(0.125)

    @given(step_graphons(max_blocks=3), step_graphons(max_blocks=2))
    def test_exact_against_brute_force(self, f, g):
        d = cut_distance_labeled(f, g)
        assert d.exact
        assert d.value == pytest.approx(_brute_cut(f, g), abs=1e-12)

    @given(step_graphons(), step_graphons())
    def test_bounds(self, f, g):
        d = cut_distance_labeled(f, g).value
        assert d >= abs(edge_density(f) - edge_density(g)) - 1e-12
        assert d <= l1_distance(f, g) + 1e-12

    def test_falls_back_to_local_search(self, rng):
        m = EXACT_CUT_MAX_BLOCKS + 4
        A = rng.random((m, m))
        f = StepGraphon.from_values(np.triu(A) + np.triu(A, 1).T)
        d = cut_distance_labeled(f, StepGraphon.constant(0.5))
        assert not d.exact
        assert d.value >= abs(edge_density(f) - 0.5)

    def test_hom_metric(self):
        f = StepGraphon.constant(0.3)
        assert hom_metric(f, f) == 0.0
        g = StepGraphon.constant(0.4)
        assert hom_metric(f, g) >= 0.5 * 0.1 - 1e-15


class TestCanonical:
    @given(step_graphons(max_blocks=7, equal=True))
    def test_idempotent(self, g):
        c = canonicalize(g)
        assert canonicalize(c) == c

    @given(step_graphons(max_blocks=7), st.data())
    def test_permutation_invariant_for_distinct_degrees(self, g, data):
        deg = np.round(g.values @ g.widths, 6)
        assume(len(set(deg.tolist())) == g.m)
        perm = data.draw(st.permutations(list(range(g.m))))
        a, b = canonicalize(g), canonicalize(g.permute(perm))
        np.testing.assert_allclose(a.values, b.values)
        np.testing.assert_allclose(a.boundaries, b.boundaries, atol=1e-12)

    @given(step_graphons(max_blocks=6), st.data())
    def test_compare_reduced_of_rearrangement(self, g, data):
        deg = np.round(g.values @ g.widths, 6)
        assume(len(set(deg.tolist())) == g.m)
        perm = data.draw(st.permutations(list(range(g.m))))
        assert compare_reduced(g, g.permute(perm)) <= 1e-12

    def test_order_puts_low_degree_first(self):
        g = StepGraphon.from_values([[0.9, 0.9], [0.9, 0.1]])
        assert canonical_order(g) == [1, 0]

    def test_bipartite_swap(self):
        f = StepGraphon([0, 0.5, 1], [[0.05, 0.4], [0.4, 0.05]])
        g = StepGraphon([0, 0.5, 1], [[0.05, 0.4], [0.4, 0.05]]).permute([1, 0])
        assert compare_reduced(f, g) == 0.0
