"""Shared oracles and toy models for the test suite."""

import itertools

import numpy as np
import pytest

from fvmcts.cg import CoordinationGraph
from fvmcts.planner import GenerativeModel


def all_joint_actions(n_actions):
    return [np.array(a, dtype=np.int64) for a in itertools.product(*(range(int(k)) for k in n_actions))]


def brute_force_max(n_actions, value):
    """Largest ``value(a)`` over every joint action."""
    return max(value(a) for a in all_joint_actions(n_actions))


def random_graph(rng, n, p=0.5):
    return CoordinationGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p])


def random_tree(rng, n):
    return CoordinationGraph(n, [(int(rng.integers(0, i)), i) for i in range(1, n)])


class CoordinationBandit(GenerativeModel):
    """Two agents, two actions each; joint action (1, 0) pays (10, 10), everything else 0.

    The state never changes, so every search level sees the same statistics.
    """

    gamma = 1.0

    def __init__(self, n_agents=2, payoff=None):
        self.n_agents = n_agents
        self.graph = CoordinationGraph(n_agents, [(i, i + 1) for i in range(n_agents - 1)])
        self.payoff = payoff or {(1, 0): 10.0}

    def initial_state(self, rng=None):
        return np.zeros(1, dtype=np.int8)

    def sample_step(self, state, action, rng):
        r = self.payoff.get(tuple(int(a) for a in action), 0.0)
        return state, np.full(self.n_agents, r)

    def coordination_graph(self, state):
        return self.graph

    def actions(self, i, state=None):
        return [0, 1]


class SingleAgentBandit(GenerativeModel):
    """One agent with Bernoulli arms, stateless."""

    gamma = 1.0
    n_agents = 1

    def __init__(self, means=(0.2, 0.5, 0.4)):
        self.means = np.asarray(means)
        self.graph = CoordinationGraph(1)

    def initial_state(self, rng=None):
        return np.zeros(1, dtype=np.int8)

    def sample_step(self, state, action, rng):
        return state, np.array([float(rng.random() < self.means[int(action[0])])])

    def coordination_graph(self, state):
        return self.graph

    def actions(self, i, state=None):
        return list(range(len(self.means)))


class Chain(GenerativeModel):
    """Deterministic counter chain: every step pays each agent 1, state counts steps."""

    def __init__(self, n_agents=2, gamma=0.9, horizon=None):
        self.n_agents = n_agents
        self.gamma = gamma
        self.horizon = horizon
        self.graph = CoordinationGraph(n_agents, [(0, 1)] if n_agents > 1 else [])

    def initial_state(self, rng=None):
        return np.zeros(1, dtype=np.int64)

    def sample_step(self, state, action, rng):
        return state + 1, np.ones(self.n_agents)

    def coordination_graph(self, state):
        return self.graph

    def actions(self, i, state=None):
        return [0, 1]

    def is_terminal(self, state):
        return self.horizon is not None and int(state[0]) >= self.horizon


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
