"""Coordination graph structure, components and elimination orders."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fvmcts.cg import (CoordinationGraph, complete_graph, elimination_order, is_tree, neighbors,
                       varel_components)


def chain4():
    # Agents 1-2-3-4 of the four-agent example, indexed from 0.
    return CoordinationGraph(4, [(0, 1), (1, 2), (2, 3)])


def test_neighbors_chain_middle_agent():
    assert neighbors(chain4(), 1) == [0, 2]


def test_neighbors_edgeless():
    g = CoordinationGraph(3)
    assert [neighbors(g, i) for i in range(3)] == [[], [], []]


def test_neighbors_triangle():
    assert neighbors(CoordinationGraph(3, [(0, 1), (1, 2), (0, 2)]), 1) == [0, 2]


@pytest.mark.parametrize("i", [-1, 4])
def test_neighbors_out_of_range(i):
    with pytest.raises(IndexError):
        neighbors(chain4(), i)


@pytest.mark.parametrize("edges", [[(0, 0)], [(0, 5)], [(-1, 2)]])
def test_invalid_edges_rejected(edges):
    with pytest.raises(ValueError):
        CoordinationGraph(4, edges)


def test_duplicate_and_reversed_edges_canonicalised():
    g = CoordinationGraph(3, [(1, 0), (0, 1), (2, 1)])
    assert g.edges == ((0, 1), (1, 2))
    assert g == CoordinationGraph(3, [(0, 1), (1, 2)])
    assert hash(g) == hash(CoordinationGraph(3, [(1, 2), (0, 1)]))


def test_components_edges_plus_isolated_singletons():
    g = CoordinationGraph(5, [(0, 1), (1, 2)])
    assert varel_components(g) == [(0, 1), (1, 2), (3,), (4,)]


def test_components_cover_every_agent():
    g = CoordinationGraph(4, [(2, 3)])
    covered = {v for c in varel_components(g) for v in c}
    assert covered == set(range(4))


def test_elimination_order_chain_starts_at_a_leaf():
    order = elimination_order(chain4())
    assert sorted(order) == [0, 1, 2, 3]
    assert order[0] == 0


def test_elimination_order_star_leaves_first():
    g = CoordinationGraph(5, [(0, i) for i in range(1, 5)])
    # After three leaves go, agent 0 and agent 4 tie at degree one and the lower index wins.
    assert elimination_order(g) == [1, 2, 3, 0, 4]


def test_complete_graph_and_tree_detection():
    assert complete_graph(4).n_edges == 6
    assert not is_tree(complete_graph(3))
    assert is_tree(chain4())
    assert is_tree(CoordinationGraph(3))


def test_from_canonical_matches_validated_constructor():
    edges = np.array([[0, 2], [1, 2], [2, 3]])
    fast = CoordinationGraph.from_canonical(4, edges)
    slow = CoordinationGraph(4, [(2, 3), (0, 2), (1, 2)])
    assert fast == slow
    for a, b in zip(fast.csr, slow.csr):
        np.testing.assert_array_equal(a, b)


@st.composite
def graphs(draw):
    n = draw(st.integers(1, 8))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True) if pairs else st.just([]))
    return CoordinationGraph(n, chosen)


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_adjacency_consistent_with_edges(g):
    edges = set(g.edges)
    for i in range(g.n_agents):
        nb = neighbors(g, i)
        assert nb == sorted(nb)
        for j in nb:
            assert (min(i, j), max(i, j)) in edges
            assert i in neighbors(g, j)
    assert sum(g.degree(i) for i in range(g.n_agents)) == 2 * g.n_edges


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_csr_slots_describe_each_edge_twice(g):
    ptr, nbr, eid, side = g.csr
    for i in range(g.n_agents):
        slots = range(ptr[i], ptr[i + 1])
        assert [nbr[p] for p in slots] == list(g.adjacency[i])
        for p in slots:
            j = nbr[p]
            assert g.edges[eid[p]] == (min(i, j), max(i, j))
            assert side[p] == (0 if i < j else 1)


@settings(max_examples=200, deadline=None)
@given(graphs())
def test_elimination_order_is_permutation(g):
    assert sorted(elimination_order(g)) == list(range(g.n_agents))
