"""Comparison policies: joint-action MCTS, independent Q-learning and uniform random.

:class:`NaiveMCTS` treats the multi-agent problem as one MDP over joint
actions. Each visited state gets dense ``(N, Q)`` tables over all
``prod_i |A_i|`` joint actions, which is exactly the exponential blow-up the
factored planners avoid; a memory guard turns that blow-up into a clean
:class:`MemoryGuardError` instead of exhausting the machine.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .planner import GenerativeModel, PlannerConfig

DEFAULT_MEMORY_CAP = 10 ** 6


class MemoryGuardError(MemoryError):
    """The joint-action statistics would exceed the configured entry cap."""


class JointActionStats:
    """Dense UCT statistics of one state over every joint action."""

    def __init__(self, n_actions: np.ndarray):
        self.n_actions = n_actions
        size = math.prod(int(a) for a in n_actions)
        self.visits = 0
        self.n = np.zeros(size, dtype=np.int64)
        self.q = np.zeros(size)

    @property
    def entries(self) -> int:
        return self.n.shape[0]

    def encode(self, action) -> int:
        return int(np.ravel_multi_index(tuple(np.asarray(action, dtype=np.int64)), tuple(self.n_actions)))

    def decode(self, index: int) -> np.ndarray:
        return np.array(np.unravel_index(int(index), tuple(self.n_actions)), dtype=np.int64)

    def update(self, index: int, team_return: float) -> None:
        self.visits += 1
        self.n[index] += 1
        self.q[index] += (team_return - self.q[index]) / self.n[index]


class NaiveMCTS:
    """UCT over the joint action space with the same search skeleton as the factored planner.

    Joint actions are indexed in row-major order of the per-agent actions, so
    ties (including unvisited sentinels) go to the lowest joint index, which is
    agent 0's lowest action first.
    """

    def __init__(self, model: GenerativeModel, config: PlannerConfig = None, rng=None,
                 memory_cap: Optional[int] = DEFAULT_MEMORY_CAP):
        self.model = model
        self.config = config or PlannerConfig()
        self.rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        self.gamma = model.gamma if self.config.gamma is None else self.config.gamma
        self.memory_cap = memory_cap
        self.store: dict = {}
        self.total_entries = 0
        self.peak_entries = 0
        self.simulations = 0

    def lookup_or_init(self, state) -> JointActionStats:
        key = self.model.state_key(state)
        entry = self.store.get(key)
        if entry is None:
            counts = np.asarray(self.model.action_counts(state), dtype=np.int64)
            size = math.prod(int(a) for a in counts)
            if self.memory_cap is not None and self.total_entries + size > self.memory_cap:
                raise MemoryGuardError(
                    f"joint-action statistics need {self.total_entries + size} entries, cap is {self.memory_cap}")
            entry = self.store[key] = JointActionStats(counts)
            self.total_entries += size
            self.peak_entries = max(self.peak_entries, size)
        return entry

    def select(self, entry: JointActionStats, c: float) -> int:
        if c <= 0:
            return int(np.argmax(entry.q))
        if entry.visits == 0:
            return 0
        with np.errstate(divide="ignore", invalid="ignore"):
            ucb = entry.q + c * np.sqrt(math.log(entry.visits) / entry.n)
        ucb[entry.n == 0] = np.inf
        return int(np.argmax(ucb))

    def plan(self, state) -> np.ndarray:
        if self.model.is_terminal(state):
            raise ValueError("cannot plan from a terminal state")
        cfg = self.config
        self.store = {}
        self.total_entries = 0
        self.peak_entries = 0
        root = self.lookup_or_init(state)
        deadline = None if not cfg.time_budget else time.perf_counter() + cfg.time_budget
        sims = 0
        while True:
            if cfg.iterations is not None and sims >= cfg.iterations:
                break
            if deadline is not None and time.perf_counter() >= deadline:
                break
            self.simulate(state, cfg.depth, self.rng)
            sims += 1
        self.simulations = sims
        return root.decode(self.select(root, 0.0))

    def simulate(self, state, depth: int, rng) -> float:
        model = self.model
        c = self.config.exploration
        path = []
        s = state
        for _ in range(depth):
            if model.is_terminal(s):
                break
            entry = self.lookup_or_init(s)
            j = self.select(entry, c)
            s, r = model.sample_step(s, entry.decode(j), rng)
            path.append((entry, j, float(np.sum(r))))
        q = 0.0
        for entry, j, r in reversed(path):
            q = r + self.gamma * q
            entry.update(j, q)
        return q


def naive_mcts_plan(model: GenerativeModel, state, cfg: PlannerConfig = None, rng=None,
                    memory_cap: Optional[int] = DEFAULT_MEMORY_CAP) -> np.ndarray:
    return NaiveMCTS(model, cfg, rng, memory_cap).plan(state)


@dataclass
class IqlTables:
    """Per-agent Q tables indexed by ``[agent, local_state, action]``."""

    q: np.ndarray
    n_actions: np.ndarray
    alpha: float = 0.1
    epsilon: float = 0.1
    episodes: int = 10_000


def _masked(q: np.ndarray, n_actions: np.ndarray) -> np.ndarray:
    return np.where(np.arange(q.shape[-1]) < n_actions[:, None], q, -np.inf)


def _greedy(q: np.ndarray, n_actions: np.ndarray) -> np.ndarray:
    return np.argmax(_masked(q, n_actions), axis=-1)


def iql_train(model: GenerativeModel, episodes: int = 10_000, alpha: float = 0.1, epsilon: float = 0.1,
              max_steps: int = 50, rng=None, gamma: Optional[float] = None) -> IqlTables:
    """Independent epsilon-greedy Q-learning, one table per agent over its local state.

    The model must expose ``n_local_states`` and ``local_states(state)``.
    Agent ``i`` learns from its own reward only. Exploration decays linearly
    from ``epsilon`` in the first episode to 0 in the last.
    """
    if episodes < 0:
        raise ValueError("episodes must be non-negative")
    rng = rng if rng is not None else np.random.default_rng()
    gamma = model.gamma if gamma is None else gamma
    n = model.n_agents
    s = model.initial_state(rng)
    n_actions = np.asarray(model.action_counts(s), dtype=np.int64)
    q = np.zeros((n, int(model.n_local_states), int(n_actions.max())))
    agents = np.arange(n)
    for ep in range(episodes):
        eps = epsilon * (1.0 - ep / episodes)
        s = model.initial_state(rng)
        loc = model.local_states(s)
        for _ in range(max_steps):
            if model.is_terminal(s):
                break
            a = _greedy(q[agents, loc], n_actions)
            explore = rng.random(n) < eps
            if explore.any():
                a = np.where(explore, rng.integers(0, n_actions), a)
            s, r = model.sample_step(s, a, rng)
            nloc = model.local_states(s)
            target = np.asarray(r, dtype=float)
            if not model.is_terminal(s):
                target = target + gamma * _masked(q[agents, nloc], n_actions).max(axis=1)
            q[agents, loc, a] += alpha * (target - q[agents, loc, a])
            loc = nloc
    return IqlTables(q=q, n_actions=n_actions, alpha=alpha, epsilon=epsilon, episodes=episodes)


def iql_act(tables: IqlTables, model: GenerativeModel, state) -> np.ndarray:
    """Greedy per-agent actions; ties go to the lowest action index."""
    loc = model.local_states(state)
    return _greedy(tables.q[np.arange(tables.q.shape[0]), loc], tables.n_actions)


def random_policy(model: GenerativeModel, state, rng) -> np.ndarray:
    """Each agent draws uniformly and independently from its own action set."""
    return rng.integers(0, np.asarray(model.action_counts(state), dtype=np.int64))
