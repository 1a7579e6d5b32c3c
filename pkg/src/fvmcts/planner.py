"""Factored-value Monte Carlo tree search.

The search keeps factored statistics per visited joint state (see
:mod:`fvmcts.stats`) and picks joint actions inside the tree with either
Max-Plus or variable elimination, both with UCB exploration. After the
budget is spent the root action is chosen once more with exploration
switched off.

There is no separate expansion or rollout phase: statistics for a state are
created on first visit and a simulation that reaches the depth limit
contributes zero value (an optional random rollout can be switched on).
"""

from __future__ import annotations

import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cg import CoordinationGraph, elimination_order
from .maxplus import MaxPlusConfig, max_plus, select_action
from .stats import StatsStore, state_key
from .varel import component_utilities, elimination_plan, var_el_select


class GenerativeModel(ABC):
    """Simulator contract for a cooperative multi-agent MDP.

    Actions are integer indices; agent ``i`` in state ``s`` may take
    ``0 .. len(actions(i, s)) - 1``. Subclasses set ``n_agents`` and ``gamma``
    and declare ``dynamic_graph = True`` when the coordination graph depends
    on the state.
    """

    n_agents: int
    gamma: float = 1.0
    dynamic_graph: bool = False

    @abstractmethod
    def initial_state(self, rng: np.random.Generator):
        ...

    @abstractmethod
    def sample_step(self, state, action, rng: np.random.Generator):
        """Sample ``(next_state, per_agent_rewards)``."""

    @abstractmethod
    def coordination_graph(self, state) -> CoordinationGraph:
        ...

    @abstractmethod
    def actions(self, i: int, state) -> list:
        ...

    def is_terminal(self, state) -> bool:
        return False

    def action_counts(self, state) -> np.ndarray:
        return np.array([len(self.actions(i, state)) for i in range(self.n_agents)], dtype=np.int64)

    def state_key(self, state) -> bytes:
        return state_key(state)


class ConfigurationError(ValueError):
    """Raised for planner or experiment settings that cannot run."""


class DynamicGraphError(ConfigurationError):
    """Variable elimination was asked to plan with a state-dependent coordination graph."""


@dataclass
class PlannerConfig:
    iterations: Optional[int] = 1000
    time_budget: Optional[float] = None
    depth: int = 10
    exploration: float = 1.0
    gamma: Optional[float] = None
    backend: str = "maxplus"
    maxplus: MaxPlusConfig = field(default_factory=MaxPlusConfig)
    seed: Optional[int] = None
    varel_epsilon: float = 0.01
    rollout_depth: int = 0

    def __post_init__(self):
        if self.depth < 1:
            raise ConfigurationError("depth must be at least 1")
        if self.iterations is None and not self.time_budget:
            raise ConfigurationError("need an iteration budget or a positive time budget")
        if self.iterations is not None and self.iterations < 1 and not self.time_budget:
            raise ConfigurationError("iterations must be at least 1")
        if self.backend not in ("maxplus", "varel"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        if self.gamma is not None and not 0.0 <= self.gamma <= 1.0:
            raise ConfigurationError("gamma must lie in [0, 1]")


class FactoredValueMCTS:
    """Planner for one model; each :meth:`plan` call searches from scratch.

    ``simulations`` and ``store`` describe the most recent search.
    """

    def __init__(self, model: GenerativeModel, config: PlannerConfig = None, rng=None):
        self.model = model
        self.config = config or PlannerConfig()
        if self.config.backend == "varel" and getattr(model, "dynamic_graph", False):
            raise DynamicGraphError("variable elimination needs a static coordination graph")
        self.rng = rng if rng is not None else np.random.default_rng(self.config.seed)
        self.gamma = model.gamma if self.config.gamma is None else self.config.gamma
        self.store: Optional[StatsStore] = None
        self.simulations = 0
        self._orders: dict = {}
        self._root_graph: Optional[CoordinationGraph] = None
        self._root_plan = None
        # Backend used for the last coordination call, and its exploration constant (for tests).
        self.last_exploration: Optional[float] = None

    @property
    def mode(self) -> str:
        return self.config.backend

    def new_store(self) -> StatsStore:
        return StatsStore(self.model, self.mode)

    def plan(self, state, store: Optional[StatsStore] = None):
        if self.model.is_terminal(state):
            raise ValueError("cannot plan from a terminal state")
        cfg = self.config
        store = store if store is not None else self.new_store()
        self.store = store
        root = store.lookup_or_init(state)
        if root.graph is not self._root_graph:
            self._root_graph = root.graph
            self._root_plan = None
        deadline = None if not cfg.time_budget else time.perf_counter() + cfg.time_budget
        sims = 0
        while True:
            if cfg.iterations is not None and sims >= cfg.iterations:
                break
            if deadline is not None and time.perf_counter() >= deadline:
                break
            self.simulate(state, cfg.depth, store, self.rng)
            sims += 1
        self.simulations = sims
        return self.select(root, 0.0)

    def select(self, entry, c: float, rng=None) -> np.ndarray:
        """Coordinate a joint action from one state's statistics."""
        self.last_exploration = c
        if self.mode == "maxplus":
            mp = self.config.maxplus
            if mp.time_budget is None:
                return select_action(entry.graph, entry, mp, c, rng)
            return max_plus(entry.graph, entry, mp, c, rng)
        g = entry.graph
        if g is self._root_graph and self._root_plan is not None:
            return self._root_plan.run(component_utilities(entry, c))
        if self._root_graph is not None and g != self._root_graph:
            raise DynamicGraphError("coordination graph changed between states under variable elimination")
        order = self._orders.get(g)
        if order is None:
            order = self._orders[g] = elimination_order(g)
        if g is self._root_graph:
            self._root_plan = elimination_plan(entry, order)
        return var_el_select(g, entry, order, c)

    def simulate(self, state, depth: int, store: StatsStore, rng) -> np.ndarray:
        """One simulation from ``state``; returns the per-agent discounted return vector.

        Statistics along the path are updated bottom-up, as the recursive
        formulation would on unwinding.
        """
        model = self.model
        gamma = self.gamma
        c = self.config.exploration
        varel = self.mode == "varel"
        eps = self.config.varel_epsilon
        check_terminal = type(model).is_terminal is not GenerativeModel.is_terminal
        lookup = store.lookup_or_init
        select = self.select
        step = model.sample_step
        path = []
        s = state
        cut = False
        for elapsed in range(depth):
            if check_terminal and model.is_terminal(s):
                cut = True
                break
            if varel and gamma < 1.0 and gamma ** elapsed < eps:
                cut = True
                break
            entry = lookup(s)
            a = select(entry, c, rng)
            s, r = step(s, a, rng)
            path.append((entry, a, r))
        q = np.zeros(model.n_agents)
        if not cut and self.config.rollout_depth > 0:
            q = self._rollout(s, rng)
        for entry, a, r in reversed(path):
            q = r + gamma * q
            if varel:
                entry.add(a, float(q.sum()))
            else:
                entry.add(a, q)
        return q

    def _rollout(self, s, rng) -> np.ndarray:
        model = self.model
        total = np.zeros(model.n_agents)
        discount = 1.0
        for _ in range(self.config.rollout_depth):
            if model.is_terminal(s):
                break
            counts = model.action_counts(s)
            a = (rng.random(model.n_agents) * counts).astype(np.int64)
            s, r = model.sample_step(s, a, rng)
            total += discount * np.asarray(r, dtype=float)
            discount *= self.gamma
        return total


def plan(model: GenerativeModel, state, cfg: PlannerConfig = None, store: Optional[StatsStore] = None,
         rng=None) -> np.ndarray:
    """Search from ``state`` under ``cfg`` and return the exploration-free best joint action."""
    return FactoredValueMCTS(model, cfg, rng).plan(state, store)
