"""Factored statistics: running means, counts, entry accounting and the store."""

import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fvmcts.cg import CoordinationGraph
from fvmcts.domains import SysAdmin, SysAdminParams
from fvmcts.stats import (ComponentStats, NodeEdgeStats, StatsStore, lookup_or_init, state_key,
                          update_maxplus_stats, update_varel_stats)

from conftest import random_graph


def ring(n):
    return CoordinationGraph(n, [(i, (i + 1) % n) for i in range(n)])


@st.composite
def update_streams(draw):
    seed = draw(st.integers(0, 2 ** 32 - 1))
    rng = np.random.default_rng(seed)
    n = draw(st.integers(1, 5))
    g = random_graph(rng, n, draw(st.floats(0, 1)))
    na = rng.integers(1, 4, n)
    length = draw(st.integers(1, 80))
    actions = [rng.integers(0, na) for _ in range(length)]
    returns = [rng.normal(0, draw(st.sampled_from([1.0, 100.0])), n) for _ in range(length)]
    return g, na, actions, returns


@settings(max_examples=150, deadline=None)
@given(update_streams())
def test_node_edge_running_means_equal_direct_means(stream):
    g, na, actions, returns = stream
    stats = NodeEdgeStats(g, na)
    for a, q in zip(actions, returns):
        stats.update(a, q)
    assert stats.visits == len(actions)
    for i in range(g.n_agents):
        for ai in range(na[i]):
            xs = [q[i] for a, q in zip(actions, returns) if a[i] == ai]
            assert stats.node_n[i, ai] == len(xs)
            if xs:
                assert abs(stats.node_q[i, ai] - np.mean(xs)) <= 1e-9 * max(1.0, np.abs(xs).max())
            else:
                assert stats.node_q[i, ai] == 0.0
    for e, (i, j) in enumerate(g.edges):
        for ai in range(na[i]):
            for aj in range(na[j]):
                xs = [q[i] + q[j] for a, q in zip(actions, returns) if a[i] == ai and a[j] == aj]
                assert stats.edge_n[e, ai, aj] == len(xs)
                if xs:
                    assert abs(stats.edge_q[e, ai, aj] - np.mean(xs)) <= 1e-9 * max(1.0, np.abs(xs).max())


@settings(max_examples=150, deadline=None)
@given(update_streams())
def test_component_running_means_equal_direct_means(stream):
    g, na, actions, returns = stream
    stats = ComponentStats(g, na)
    for a, q in zip(actions, returns):
        stats.update(a, q.sum())
    assert stats.visits == len(actions)
    for e, comp in enumerate(stats.components):
        n_tab, q_tab = stats.table(e, "n"), stats.table(e, "q")
        for idx in np.ndindex(*stats.shape(e)):
            xs = [q.sum() for a, q in zip(actions, returns) if tuple(a[list(comp)]) == idx]
            assert n_tab[idx] == len(xs)
            if xs:
                assert abs(q_tab[idx] - np.mean(xs)) <= 1e-9 * max(1.0, np.abs(xs).max())


def test_first_update_sets_mean_to_sample():
    stats = NodeEdgeStats(CoordinationGraph(2, [(0, 1)]), [2, 2])
    stats.update([1, 0], [3.0, 4.0])
    assert stats.node_q[0, 1] == 3.0 and stats.node_q[1, 0] == 4.0
    assert stats.edge_q[0, 1, 0] == 7.0
    assert stats.node_n.sum() == 2 and stats.edge_n.sum() == 1


def test_update_rejects_wrong_return_length():
    stats = NodeEdgeStats(CoordinationGraph(2, [(0, 1)]), [2, 2])
    with pytest.raises(ValueError):
        stats.update([0, 0], [1.0])


def test_entry_counts_ring16():
    g = ring(16)
    assert NodeEdgeStats(g, np.full(16, 2)).entries == 16 * 2 + 16 * 4 == 96
    assert ComponentStats(g, np.full(16, 2)).entries == 16 * 4


def test_entry_counts_mixed_action_sizes():
    g = CoordinationGraph(3, [(0, 1)])
    assert NodeEdgeStats(g, [2, 3, 4]).entries == 2 + 3 + 4 + 6
    # Edge component (0, 1) plus singleton for isolated agent 2.
    assert ComponentStats(g, [2, 3, 4]).entries == 6 + 4


def test_state_key_distinguishes_states_and_dtypes():
    a = np.array([[0, 1], [2, 0]], dtype=np.int8)
    assert state_key(a) == state_key(a.copy())
    assert state_key(a) != state_key(a[::-1])
    assert state_key(a.T.copy()) == state_key(a.T)


def test_store_creates_zeroed_entries_lazily_and_tracks_size():
    model = SysAdmin(SysAdminParams(n_agents=16))
    store = StatsStore(model, "maxplus")
    s0 = model.initial_state()
    assert s0 not in store
    entry = lookup_or_init(store, s0)
    assert entry.visits == 0 and not entry.node_q.any() and not entry.edge_q.any()
    assert store.lookup_or_init(s0) is entry
    s1 = s0.copy()
    s1[0, 0] = 1
    store.lookup_or_init(s1)
    assert len(store) == 2
    assert store.peak_entries == 96
    assert store.total_entries == 192


def test_store_rejects_unknown_mode():
    with pytest.raises(ValueError):
        StatsStore(SysAdmin(), "mcts")


def test_update_helpers_and_mismatch_errors():
    model = SysAdmin(SysAdminParams(n_agents=3))
    s = model.initial_state()
    mp = StatsStore(model, "maxplus")
    update_maxplus_stats(mp, s, [1, 0, 1], [1.0, 2.0, 3.0], graph=model.graph)
    assert mp.get(s).visits == 1
    with pytest.raises(ValueError):
        update_maxplus_stats(mp, s, [1, 0, 1], [1.0, 2.0, 3.0], graph=CoordinationGraph(3))
    ve = StatsStore(model, "varel")
    update_varel_stats(ve, s, [1, 0, 1], 6.0)
    assert ve.get(s).comp_q.max() == 6.0
    with pytest.raises(ValueError):
        update_varel_stats(ve, s, [1, 0, 1], 6.0, components=[(0, 1)])


def test_dump_csv_lists_every_statistic():
    model = SysAdmin(SysAdminParams(n_agents=3))
    s = model.initial_state()
    store = StatsStore(model, "maxplus")
    update_maxplus_stats(store, s, [1, 0, 1], [1.0, 2.0, 3.0])
    buf = io.StringIO()
    text = store.dump_csv(s, buf)
    lines = text.strip().split("\n")
    assert lines[0] == "state,kind,indices,actions,N,Q"
    assert len(lines) - 1 == store.get(s).entries
    assert buf.getvalue() == text
    assert any(line.endswith(",node,0,1,1,1") for line in lines)
