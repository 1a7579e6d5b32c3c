"""Multi-Drone Delivery: drones fly to assigned goal regions on a grid and board.

Grid geometry. The standard XY resolutions are read as cell widths on a
2 x 2 operating area, so the grid is ``round(2 / resolution)`` cells a side
(0.20 -> 10 x 10, 0.10 -> 20 x 20, 0.08 -> 25 x 25, 0.05 -> 40 x 40). The four
goal regions are discs centred on the quadrant centres
``(W // 4, W // 4)``, ``(W // 4, 3W // 4)``, ``(3W // 4, W // 4)``,
``(3W // 4, 3W // 4)`` with radius ``max(1, round(0.1 / resolution))`` cells
(Euclidean, on cell indices). The coordination-graph proximity threshold is
``round(0.4 / resolution)`` cells of Chebyshev distance (2 at resolution 0.2).

A state is an ``int16`` array of shape ``(n, 4)`` with columns
``x, y, boarded, goal``.

Actions 0-7 move to the 8-connected neighbours (E, NE, N, NW, W, SW, S, SE),
8 is NOOP and 9 is BOARD. Per step and drone:

* a move is perturbed with probability ``noise`` to one of the two adjacent
  directions; leaving the grid keeps the drone in place with
  ``off_grid_penalty``; every attempted move costs ``move_cost``;
* drones whose targets coincide, or that try to swap cells, or that try to
  enter a cell a drone keeps, stay put and pay ``collision_penalty``
  (resolved to a fixed point);
* BOARD outside the drone's own region is a NOOP with
  ``invalid_board_penalty``; inside it earns ``goal_reward`` and removes the
  drone from the grid, except that when several drones board the same region
  at once only the lowest index succeeds and the rest pay
  ``board_conflict_penalty``;
* a non-boarding drone earns ``shaping * (d_before - d_after)`` where ``d`` is
  the Euclidean distance to its goal centre;
* every pair of drones left on the grid within the proximity threshold pays
  ``proximity_penalty`` each.

The episode ends once every drone has boarded.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from numba import njit

from ..cg import CoordinationGraph, complete_graph
from ..planner import GenerativeModel

N_ACTIONS = 10
NOOP, BOARD = 8, 9
ACTION_NAMES = ("E", "NE", "N", "NW", "W", "SW", "S", "SE", "noop", "board")
_DIRS = np.array([[1, 0], [1, 1], [0, 1], [-1, 1], [-1, 0], [-1, -1], [0, -1], [1, -1]], dtype=np.int64)

# Standard benchmark rows: agents -> (XY resolution, noise, exploration constant, depth, iterations).
TABLE1 = {
    8: (0.20, 0.10, 5.0, 10, 4000),
    16: (0.10, 0.05, 10.0, 10, 8000),
    32: (0.08, 0.05, 20.0, 10, 16000),
    48: (0.05, 0.02, 30.0, 10, 24000),
}


@dataclass(frozen=True)
class DroneParams:
    n_agents: int = 8
    resolution: float = 0.20
    noise: float = 0.10
    grid_size: Optional[int] = None
    goal_radius: Optional[float] = None
    threshold: Optional[int] = None
    goal_reward: float = 1000.0
    collision_penalty: float = 10.0
    move_cost: float = 0.1
    shaping: float = 1.0
    proximity_penalty: float = 0.25
    off_grid_penalty: float = 1.0
    invalid_board_penalty: float = 1.0
    board_conflict_penalty: float = 10.0
    gamma: float = 1.0
    # "dynamic": distance and shared-goal edges per state; "complete": one static complete graph.
    coordination: str = "dynamic"

    def __post_init__(self):
        if self.n_agents < 1:
            raise ValueError("n_agents must be positive")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")
        if self.resolution <= 0:
            raise ValueError("resolution must be positive")
        if self.cg_threshold < 1:
            raise ValueError("threshold must be at least 1")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.coordination not in ("dynamic", "complete"):
            raise ValueError(f"coordination must be 'dynamic' or 'complete', got {self.coordination!r}")

    @classmethod
    def from_table(cls, n_agents: int, **kwargs) -> "DroneParams":
        res, noise = TABLE1[n_agents][:2]
        return cls(n_agents=n_agents, resolution=res, noise=noise, **kwargs)

    @property
    def side(self) -> int:
        return int(self.grid_size) if self.grid_size else int(round(2.0 / self.resolution))

    @property
    def radius(self) -> float:
        return float(self.goal_radius) if self.goal_radius else float(max(1, round(0.1 / self.resolution)))

    @property
    def cg_threshold(self) -> int:
        return int(self.threshold) if self.threshold else int(max(1, round(0.4 / self.resolution)))

    def centers(self) -> np.ndarray:
        lo, hi = self.side // 4, (3 * self.side) // 4
        return np.array([[lo, lo], [lo, hi], [hi, lo], [hi, hi]], dtype=np.int64)

    def region_cells(self, goal: int) -> list[tuple[int, int]]:
        cx, cy = self.centers()[goal]
        r2 = self.radius ** 2
        return [(x, y) for x in range(self.side) for y in range(self.side)
                if (x - cx) ** 2 + (y - cy) ** 2 <= r2]

    def capacity(self, goal: int) -> int:
        return len(self.region_cells(goal))

    def to_dict(self) -> dict:
        return asdict(self)


@njit(cache=True)
def _in_region(x, y, g, centers, r2):
    dx = x - centers[g, 0]
    dy = y - centers[g, 1]
    return dx * dx + dy * dy <= r2


@njit(cache=True)
def _step(state, action, u, centers, r2, side, thr, dirs, w):
    # w: noise, goal_reward, collision, move_cost, shaping, proximity, off_grid, invalid_board, board_conflict
    n = state.shape[0]
    out = state.copy()
    r = np.zeros(n)
    tx = np.empty(n, dtype=np.int64)
    ty = np.empty(n, dtype=np.int64)
    boarding = np.zeros(n, dtype=np.bool_)
    active = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        tx[i] = state[i, 0]
        ty[i] = state[i, 1]
        if state[i, 2] != 0:
            continue
        active[i] = True
        a = action[i]
        if a < 8:
            d = a
            if u[i, 0] < w[0]:
                d = (d + (1 if u[i, 1] < 0.5 else 7)) % 8
            nx = tx[i] + dirs[d, 0]
            ny = ty[i] + dirs[d, 1]
            r[i] -= w[3]
            if nx < 0 or ny < 0 or nx >= side or ny >= side:
                r[i] -= w[6]
            else:
                tx[i] = nx
                ty[i] = ny
        elif a == 9:
            if _in_region(tx[i], ty[i], state[i, 3], centers, r2):
                boarding[i] = True
            else:
                r[i] -= w[7]

    # one boarder per region per step, lowest index first
    taken = np.zeros(4, dtype=np.bool_)
    for i in range(n):
        if boarding[i]:
            g = state[i, 3]
            if taken[g]:
                boarding[i] = False
                r[i] -= w[8]
            else:
                taken[g] = True

    penalized = np.zeros(n, dtype=np.bool_)
    changed = True
    while changed:
        changed = False
        for i in range(n):
            if not active[i]:
                continue
            for j in range(i + 1, n):
                if not active[j]:
                    continue
                mi = tx[i] != state[i, 0] or ty[i] != state[i, 1]
                mj = tx[j] != state[j, 0] or ty[j] != state[j, 1]
                if not (mi or mj):
                    continue
                clash = tx[i] == tx[j] and ty[i] == ty[j]
                swap = (mi and mj and tx[i] == state[j, 0] and ty[i] == state[j, 1]
                        and tx[j] == state[i, 0] and ty[j] == state[i, 1])
                if clash or swap:
                    if mi:
                        tx[i] = state[i, 0]
                        ty[i] = state[i, 1]
                        if not penalized[i]:
                            r[i] -= w[2]
                            penalized[i] = True
                    if mj:
                        tx[j] = state[j, 0]
                        ty[j] = state[j, 1]
                        if not penalized[j]:
                            r[j] -= w[2]
                            penalized[j] = True
                    changed = True

    for i in range(n):
        if not active[i]:
            continue
        if boarding[i]:
            out[i, 2] = 1
            r[i] += w[1]
            continue
        g = state[i, 3]
        dx0 = state[i, 0] - centers[g, 0]
        dy0 = state[i, 1] - centers[g, 1]
        dx1 = tx[i] - centers[g, 0]
        dy1 = ty[i] - centers[g, 1]
        r[i] += w[4] * (np.sqrt(dx0 * dx0 + dy0 * dy0) - np.sqrt(dx1 * dx1 + dy1 * dy1))
        out[i, 0] = tx[i]
        out[i, 1] = ty[i]

    for i in range(n):
        if out[i, 2] != 0:
            continue
        for j in range(i + 1, n):
            if out[j, 2] != 0:
                continue
            if max(abs(out[i, 0] - out[j, 0]), abs(out[i, 1] - out[j, 1])) <= thr:
                r[i] -= w[5]
                r[j] -= w[5]
    return out, r


@njit(cache=True)
def _edges(state, thr):
    n = state.shape[0]
    buf = np.empty((n * (n - 1) // 2, 2), dtype=np.int64)
    k = 0
    for i in range(n):
        if state[i, 2] != 0:
            continue
        for j in range(i + 1, n):
            if state[j, 2] != 0:
                continue
            near = max(abs(state[i, 0] - state[j, 0]), abs(state[i, 1] - state[j, 1])) <= thr
            if near or state[i, 3] == state[j, 3]:
                buf[k, 0] = i
                buf[k, 1] = j
                k += 1
    return buf[:k]


def _weights(p: DroneParams) -> np.ndarray:
    return np.array([p.noise, p.goal_reward, p.collision_penalty, p.move_cost, p.shaping,
                     p.proximity_penalty, p.off_grid_penalty, p.invalid_board_penalty,
                     p.board_conflict_penalty])


def drone_step(params: DroneParams, state, action, rng):
    """Sample ``(next_state, rewards)`` for one joint action."""
    a = np.asarray(action, dtype=np.int64)
    if a.shape != (params.n_agents,) or np.any((a < 0) | (a >= N_ACTIONS)):
        raise ValueError(f"invalid drone joint action {action!r}")
    u = rng.random((params.n_agents, 2))
    return _step(np.asarray(state, dtype=np.int16), a, u, params.centers(), params.radius ** 2,
                 params.side, params.cg_threshold, _DIRS, _weights(params))


def drone_cg(params: DroneParams, state) -> CoordinationGraph:
    """Edges between nearby drones and between drones sharing a goal; boarded drones are isolated."""
    return CoordinationGraph(params.n_agents, map(tuple, _edges(np.asarray(state), params.cg_threshold)))


def drone_initial_state(params: DroneParams, rng) -> np.ndarray:
    """Distinct random cells outside every goal region; at least two drones per region when n >= 8."""
    n = params.n_agents
    if n >= 8:
        goals = np.concatenate([np.repeat(np.arange(4), 2), rng.integers(0, 4, n - 8)])
    else:
        goals = np.arange(n) % 4
    goals = rng.permutation(goals)
    in_any = set()
    for g in range(4):
        in_any.update(params.region_cells(g))
    free = [(x, y) for x in range(params.side) for y in range(params.side) if (x, y) not in in_any]
    if len(free) < n:
        raise ValueError("grid too small for the number of drones")
    picks = rng.choice(len(free), size=n, replace=False)
    state = np.zeros((n, 4), dtype=np.int16)
    for i, k in enumerate(picks):
        state[i, 0], state[i, 1] = free[k]
    state[:, 3] = goals
    return state


class MultiDroneDelivery(GenerativeModel):
    """Multi-Drone Delivery as a generative model.

    The coordination graph is state dependent by default. With
    ``coordination="complete"`` every state uses one static complete graph,
    which lets exact variable elimination run on the domain.
    """

    def __init__(self, params: DroneParams = None, **kwargs):
        self.params = params or DroneParams(**kwargs)
        p = self.params
        self.dynamic_graph = p.coordination == "dynamic"
        self._complete = None if self.dynamic_graph else complete_graph(p.n_agents)
        self.n_agents = p.n_agents
        self.gamma = p.gamma
        self._centers = p.centers()
        self._r2 = p.radius ** 2
        self._side = p.side
        self._thr = p.cg_threshold
        self._w = _weights(p)
        self._counts = np.full(self.n_agents, N_ACTIONS, dtype=np.int64)
        self._graphs: dict = {}

    @property
    def name(self) -> str:
        return "drones"

    @property
    def topology(self) -> str:
        return self.params.coordination

    def initial_state(self, rng):
        return drone_initial_state(self.params, rng)

    def sample_step(self, state, action, rng):
        u = rng.random((self.n_agents, 2))
        return _step(state, action, u, self._centers, self._r2, self._side, self._thr, _DIRS, self._w)

    def checked_step(self, state, action, rng):
        return drone_step(self.params, state, action, rng)

    def coordination_graph(self, state) -> CoordinationGraph:
        if self._complete is not None:
            return self._complete
        edges = _edges(state, self._thr)
        key = edges.tobytes()
        g = self._graphs.get(key)
        if g is None:
            g = self._graphs[key] = CoordinationGraph.from_canonical(self.n_agents, edges)
        return g

    def actions(self, i, state=None):
        return list(ACTION_NAMES)

    def action_counts(self, state=None):
        return self._counts

    def is_terminal(self, state) -> bool:
        return bool(state[:, 2].all())

    @property
    def n_local_states(self) -> int:
        return 4 * self._side * self._side * 2

    def local_states(self, state) -> np.ndarray:
        s = np.asarray(state, dtype=np.int64)
        return ((s[:, 3] * self._side + s[:, 0]) * self._side + s[:, 1]) * 2 + s[:, 2]
