"""SysAdmin: a network of machines that fail, get rebooted and run processes.

Each machine has a status (GOOD, FAULTY, DEAD) and a load (IDLE, LOADED,
SUCCESS). A state is an ``int8`` array of shape ``(n, 2)``: column 0 holds
the status, column 1 the load. Per machine and step, given action NOOP:

* status degrades one level at most: GOOD -> FAULTY with probability
  ``p_fail_base + p_fail_bonus_per_dead_neighbor * d`` and FAULTY -> DEAD with
  ``p_dead_base + p_dead_bonus_per_dead_neighbor * d``, where ``d`` counts DEAD
  neighbours in the coordination graph (probabilities clipped to 1); DEAD
  stays DEAD;
* load: IDLE -> LOADED with probability ``p_load``; LOADED -> SUCCESS with
  ``p_done_good`` (GOOD) or ``p_done_faulty`` (FAULTY), judged on the status at
  the start of the step; SUCCESS -> IDLE. A machine that is or becomes DEAD
  drops its process (load IDLE).

REBOOT resets the machine to GOOD / IDLE. Machine ``i`` earns reward 1 exactly
when its process reaches SUCCESS this step.

Topologies: ``ring`` (cycle over 0..n-1), ``star`` (hub 0) and
``ring_of_rings``: ``n / ring_size`` inner rings of consecutive indices, whose
first nodes (0, m, 2m, ...) are joined in an outer ring.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from ..cg import CoordinationGraph
from ..planner import GenerativeModel

GOOD, FAULTY, DEAD = 0, 1, 2
IDLE, LOADED, SUCCESS = 0, 1, 2
NOOP, REBOOT = 0, 1
ACTION_NAMES = ("noop", "reboot")
TOPOLOGIES = ("ring", "star", "ring_of_rings")


@dataclass(frozen=True)
class SysAdminParams:
    topology: str = "ring"
    n_agents: int = 4
    ring_size: int = 3
    p_fail_base: float = 0.05
    p_fail_bonus_per_dead_neighbor: float = 0.3
    p_dead_base: float = 0.05
    p_dead_bonus_per_dead_neighbor: float = 0.3
    p_load: float = 0.5
    p_done_good: float = 0.5
    p_done_faulty: float = 0.25
    gamma: float = 0.9

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}; expected one of {TOPOLOGIES}")
        if self.n_agents < 1:
            raise ValueError("n_agents must be positive")
        if self.topology == "ring_of_rings" and (self.ring_size < 1 or self.n_agents % self.ring_size):
            raise ValueError("ring_of_rings needs n_agents to be a multiple of ring_size")
        for name in ("p_fail_base", "p_fail_bonus_per_dead_neighbor", "p_dead_base",
                     "p_dead_bonus_per_dead_neighbor", "p_load", "p_done_good", "p_done_faulty", "gamma"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self) -> dict:
        return asdict(self)


def _ring_edges(nodes):
    k = len(nodes)
    if k < 2:
        return []
    if k == 2:
        return [(nodes[0], nodes[1])]
    return [(nodes[i], nodes[(i + 1) % k]) for i in range(k)]


def sysadmin_cg(params: SysAdminParams) -> CoordinationGraph:
    n = params.n_agents
    if params.topology == "ring":
        edges = _ring_edges(list(range(n)))
    elif params.topology == "star":
        edges = [(0, i) for i in range(1, n)]
    else:
        m = params.ring_size
        edges = []
        for r in range(n // m):
            edges += _ring_edges(list(range(r * m, (r + 1) * m)))
        edges += _ring_edges(list(range(0, n, m)))
    return CoordinationGraph(n, edges)


@njit(cache=True)
def _step(state, action, u, ptr, nbr, p):
    n = state.shape[0]
    out = np.empty_like(state)
    r = np.zeros(n)
    for i in range(n):
        s = state[i, 0]
        load = state[i, 1]
        if action[i] == 1:
            out[i, 0] = 0
            out[i, 1] = 0
            continue
        dead = 0
        for q in range(ptr[i], ptr[i + 1]):
            if state[nbr[q], 0] == 2:
                dead += 1
        ns = s
        if s == 0:
            if u[i, 0] < min(1.0, p[0] + p[1] * dead):
                ns = 1
        elif s == 1:
            if u[i, 0] < min(1.0, p[2] + p[3] * dead):
                ns = 2
        nl = load
        if s == 2 or ns == 2:
            nl = 0
        elif load == 0:
            if u[i, 1] < p[4]:
                nl = 1
        elif load == 1:
            done = p[5] if s == 0 else p[6]
            if u[i, 1] < done:
                nl = 2
                r[i] = 1.0
        else:
            nl = 0
        out[i, 0] = ns
        out[i, 1] = nl
    return out, r


def sysadmin_step(params: SysAdminParams, state, action, rng, graph: CoordinationGraph = None):
    """Sample ``(next_state, rewards)`` for one joint action."""
    a = np.asarray(action, dtype=np.int64)
    state = np.asarray(state, dtype=np.int8)
    if a.shape != (params.n_agents,) or np.any((a != NOOP) & (a != REBOOT)):
        raise ValueError(f"invalid SysAdmin joint action {action!r}")
    graph = graph or sysadmin_cg(params)
    ptr, nbr, _, _ = graph.csr
    u = rng.random((params.n_agents, 2))
    return _step(state, a, u, ptr, nbr, _prob_vector(params))


def _prob_vector(params: SysAdminParams) -> np.ndarray:
    return np.array([params.p_fail_base, params.p_fail_bonus_per_dead_neighbor, params.p_dead_base,
                     params.p_dead_bonus_per_dead_neighbor, params.p_load, params.p_done_good,
                     params.p_done_faulty])


class SysAdmin(GenerativeModel):
    """SysAdmin as a generative model with a static coordination graph."""

    dynamic_graph = False

    def __init__(self, params: SysAdminParams = None, **kwargs):
        self.params = params or SysAdminParams(**kwargs)
        self.n_agents = self.params.n_agents
        self.gamma = self.params.gamma
        self.graph = sysadmin_cg(self.params)
        self._ptr, self._nbr, _, _ = self.graph.csr
        self._p = _prob_vector(self.params)
        self._counts = np.full(self.n_agents, 2, dtype=np.int64)

    @property
    def name(self) -> str:
        return "sysadmin"

    @property
    def topology(self) -> str:
        return self.params.topology

    def initial_state(self, rng=None):
        return np.zeros((self.n_agents, 2), dtype=np.int8)

    def sample_step(self, state, action, rng):
        u = rng.random((self.n_agents, 2))
        return _step(state, action, u, self._ptr, self._nbr, self._p)

    def checked_step(self, state, action, rng):
        return sysadmin_step(self.params, state, action, rng, self.graph)

    def coordination_graph(self, state=None) -> CoordinationGraph:
        return self.graph

    def actions(self, i, state=None):
        return list(ACTION_NAMES)

    def action_counts(self, state=None):
        return self._counts

    # Local view for independent learners: (status, load) of one machine.
    n_local_states = 9

    def local_states(self, state) -> np.ndarray:
        s = np.asarray(state, dtype=np.int64)
        return s[:, 0] * 3 + s[:, 1]
