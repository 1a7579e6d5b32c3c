"""Joint-action MCTS, independent Q-learning and the uniform random policy."""

import math

import numpy as np
import pytest

from fvmcts.baselines import (JointActionStats, MemoryGuardError, NaiveMCTS, iql_act, iql_train,
                              naive_mcts_plan, random_policy)
from fvmcts.domains import SysAdmin, SysAdminParams
from fvmcts.planner import PlannerConfig, plan

from conftest import CoordinationBandit, SingleAgentBandit


class LocalBandit(CoordinationBandit):
    """The coordination bandit with a one-state local view for independent learners."""

    n_local_states = 1

    def local_states(self, state):
        return np.zeros(self.n_agents, dtype=np.int64)

    def is_terminal(self, state):
        return False


class OneShotBandit(SingleAgentBandit):
    """Single-agent bandit with a one-state local view and an episode of one step."""

    n_local_states = 1

    def local_states(self, state):
        return np.zeros(1, dtype=np.int64)


def test_joint_index_is_row_major():
    stats = JointActionStats(np.array([2, 3]))
    assert stats.entries == 6
    assert stats.encode([1, 2]) == 5 and stats.encode([0, 1]) == 1
    np.testing.assert_array_equal(stats.decode(4), [1, 1])


def test_naive_mcts_finds_coordination_optimum():
    model = CoordinationBandit()
    cfg = PlannerConfig(iterations=200, depth=1, exploration=1.0, seed=0)
    np.testing.assert_array_equal(naive_mcts_plan(model, model.initial_state(), cfg), [1, 0])


def test_naive_mcts_tries_every_joint_action_first_in_index_order():
    model = CoordinationBandit(payoff={})
    planner = NaiveMCTS(model, PlannerConfig(iterations=4, depth=1, exploration=1.0, seed=0))
    planner.plan(model.initial_state())
    entry = next(iter(planner.store.values()))
    np.testing.assert_array_equal(entry.n, [1, 1, 1, 1])


def test_naive_and_varel_agree_on_single_agent_problem():
    # With one agent the single Var-El component is the whole joint action, so both
    # planners keep identical tables and draw identical samples.
    model = SingleAgentBandit()
    s = model.initial_state()
    for seed in range(5):
        cfg = PlannerConfig(iterations=150, depth=1, exploration=2.0, backend="varel", seed=seed)
        naive = NaiveMCTS(model, cfg)
        a_naive = naive.plan(s)
        ours = plan(model, s, cfg)
        np.testing.assert_array_equal(a_naive, ours)


def test_single_agent_statistics_match_varel_exactly():
    from fvmcts.planner import FactoredValueMCTS

    model = SingleAgentBandit()
    s = model.initial_state()
    cfg = PlannerConfig(iterations=80, depth=1, exploration=2.0, backend="varel", seed=7)
    naive = NaiveMCTS(model, cfg)
    naive.plan(s)
    ours = FactoredValueMCTS(model, cfg)
    ours.plan(s)
    entry = ours.store.get(s)
    joint = next(iter(naive.store.values()))
    np.testing.assert_array_equal(entry.comp_n, joint.n)
    np.testing.assert_allclose(entry.comp_q, joint.q, rtol=0, atol=1e-12)


def test_memory_guard_trips_on_sixteen_agents():
    model = SysAdmin(SysAdminParams(n_agents=16))
    planner = NaiveMCTS(model, PlannerConfig(iterations=10, depth=5, seed=0), memory_cap=10 ** 6)
    with pytest.raises(MemoryGuardError):
        planner.plan(model.initial_state())
    # 2 ** 16 entries per state: 15 states fit under the cap, the 16th does not.
    assert planner.total_entries == 15 * 2 ** 16
    assert planner.peak_entries == 2 ** 16


def test_memory_guard_can_be_disabled():
    model = CoordinationBandit()
    planner = NaiveMCTS(model, PlannerConfig(iterations=3, depth=2, seed=0), memory_cap=None)
    planner.plan(model.initial_state())
    assert planner.total_entries == 4


def test_naive_terminal_root_rejected():
    from conftest import Chain

    model = Chain(horizon=0)
    with pytest.raises(ValueError):
        NaiveMCTS(model, PlannerConfig(iterations=1)).plan(model.initial_state())


def test_naive_backup_discounts():
    from conftest import Chain

    model = Chain(gamma=0.5)
    planner = NaiveMCTS(model, PlannerConfig(iterations=1, depth=3, seed=0))
    q = planner.simulate(model.initial_state(), 3, planner.rng)
    # Team reward 2 per step: 2 + 0.5 * 2 + 0.25 * 2.
    assert q == pytest.approx(3.5)


def test_iql_learns_bandit_arm():
    model = OneShotBandit(means=(0.1, 0.9, 0.3))
    tables = iql_train(model, episodes=500, max_steps=1, rng=np.random.default_rng(0))
    assert int(iql_act(tables, model, model.initial_state())[0]) == 1
    assert tables.q.shape == (1, 1, 3)


def test_iql_untrained_tables_pick_action_zero():
    model = SysAdmin(SysAdminParams(n_agents=4))
    tables = iql_train(model, episodes=0)
    np.testing.assert_array_equal(iql_act(tables, model, model.initial_state()), [0, 0, 0, 0])
    assert tables.q.shape == (4, 9, 2)


def test_iql_learns_from_own_reward_only():
    # Only agent 0 is paid, so agent 1 never updates away from zero.
    model = LocalBandit(payoff={(1, 0): 10.0, (1, 1): 10.0})
    model.sample_step = lambda s, a, rng: (s, np.array([10.0 if a[0] == 1 else 0.0, 0.0]))
    tables = iql_train(model, episodes=200, max_steps=1, gamma=0.0, rng=np.random.default_rng(1))
    assert tables.q[0, 0, 1] > tables.q[0, 0, 0]
    np.testing.assert_array_equal(tables.q[1], 0.0)


def test_iql_is_reproducible():
    model = SysAdmin(SysAdminParams(n_agents=4))
    a = iql_train(model, episodes=30, max_steps=10, rng=np.random.default_rng(5))
    b = iql_train(model, episodes=30, max_steps=10, rng=np.random.default_rng(5))
    np.testing.assert_array_equal(a.q, b.q)


def test_random_policy_reproducible_and_in_range():
    model = SysAdmin(SysAdminParams(n_agents=6))
    s = model.initial_state()
    a = [random_policy(model, s, np.random.default_rng(3)) for _ in range(2)]
    np.testing.assert_array_equal(a[0], a[1])
    assert set(np.unique(a[0])) <= {0, 1}


def test_random_policy_singleton_action_set():
    model = SingleAgentBandit(means=(0.5,))
    rng = np.random.default_rng(0)
    assert all(int(random_policy(model, model.initial_state(), rng)[0]) == 0 for _ in range(20))


def test_random_policy_is_uniform():
    model = SingleAgentBandit(means=(0.1, 0.2, 0.3, 0.4))
    rng = np.random.default_rng(11)
    draws = np.array([int(random_policy(model, model.initial_state(), rng)[0]) for _ in range(4000)])
    counts = np.bincount(draws, minlength=4)
    sigma = math.sqrt(4000 * 0.25 * 0.75)
    assert np.all(np.abs(counts - 1000) < 3 * sigma)
