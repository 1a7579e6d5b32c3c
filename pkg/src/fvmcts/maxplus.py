"""Anytime joint-action selection by Max-Plus message passing.

Messages live in a dense array ``msgs[e, side, a]``: for edge ``e = (u, v)``
with ``u < v``, ``side == 0`` holds the message ``u -> v`` (indexed by
``v``'s actions) and ``side == 1`` the message ``v -> u``. Rounds follow a
sequential schedule: agents in ascending index order recompute all their
outgoing messages from the latest incoming ones.

Exploration follows UCB in two places, each switchable:

* node bonus ``c * sqrt(log(N + 1) / N_i(a_i))`` added when an agent picks its
  action;
* edge bonus ``c * sqrt(log(N + 1) / N_ij(a_i, a_j))`` added inside the
  message maximisation once, after the final round. Adding it in every round
  compounds around cycles, so that mode exists only for regression tests.

Unvisited actions get an infinite bonus so every action is tried once.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from numba import njit

from .cg import CoordinationGraph
from .stats import NodeEdgeStats


@dataclass(frozen=True)
class MaxPlusConfig:
    max_rounds: int = 10
    use_node_utilities: bool = True
    node_exploration: bool = True
    edge_exploration: bool = False
    message_normalization: bool = True
    tol: float = 1e-6
    time_budget: Optional[float] = None
    # Test-only: add the edge bonus inside every round instead of once at the end.
    edge_bonus_every_round: bool = False

    def __post_init__(self):
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        if self.tol < 0:
            raise ValueError("tol must be non-negative")

    @classmethod
    def from_flags(cls, flags: str, **kwargs) -> "MaxPlusConfig":
        """Build from a T/F triple: agent utilities, node bonus, edge bonus (e.g. ``"TTF"``)."""
        flags = flags.upper()
        if len(flags) != 3 or set(flags) - {"T", "F"}:
            raise ValueError(f"flags must be three of T/F, got {flags!r}")
        t = [f == "T" for f in flags]
        return cls(use_node_utilities=t[0], node_exploration=t[1], edge_exploration=t[2], **kwargs)

    @property
    def flags(self) -> str:
        return "".join("T" if f else "F" for f in
                       (self.use_node_utilities, self.node_exploration, self.edge_exploration))

    def with_(self, **kwargs) -> "MaxPlusConfig":
        return replace(self, **kwargs)


class MessageTable:
    """Messages ``mu_ij(a_j)`` for every directed edge of a graph."""

    def __init__(self, graph: CoordinationGraph, n_actions, values=None):
        self.graph = graph
        self.n_actions = np.asarray(n_actions, dtype=np.int64)
        amax = int(self.n_actions.max())
        if values is None:
            values = np.zeros((graph.n_edges, 2, amax))
        self.values = values
        self._index = {e: k for k, e in enumerate(graph.edges)}

    def slot(self, i: int, j: int) -> tuple[int, int]:
        e = self._index.get((min(i, j), max(i, j)))
        if e is None:
            raise KeyError(f"({i}, {j}) is not an edge")
        return e, 0 if i < j else 1

    def get(self, i: int, j: int) -> np.ndarray:
        """Message from ``i`` to ``j``, indexed by ``j``'s actions."""
        e, s = self.slot(i, j)
        return self.values[e, s, : self.n_actions[j]].copy()

    def set(self, i: int, j: int, msg) -> None:
        e, s = self.slot(i, j)
        self.values[e, s, : self.n_actions[j]] = msg

    def max_norm(self) -> float:
        if self.values.size == 0:
            return 0.0
        return float(np.abs(self.values).max())


@njit(cache=True, inline="always")
def _bonus(c, log_term, count):
    if count == 0:
        return np.inf
    return c * math.sqrt(log_term / count)


@njit(cache=True, inline="always")
def _message(i, p, node_q, use_util, edge_q, edge_n, ptr, nbr, eid, side, n_actions, msgs,
             c, log_term, with_bonus, base, out):
    """Fill ``out`` with the message along slot ``p`` of agent ``i``."""
    j = nbr[p]
    e = eid[p]
    s = side[p]
    ai_n = n_actions[i]
    aj_n = n_actions[j]
    for ai in range(ai_n):
        base[ai] = node_q[i, ai] if use_util else 0.0
    for p2 in range(ptr[i], ptr[i + 1]):
        if p2 == p:
            continue
        e2 = eid[p2]
        s2 = 1 - side[p2]
        for ai in range(ai_n):
            base[ai] += msgs[e2, s2, ai]
    for aj in range(aj_n):
        best = -np.inf
        for ai in range(ai_n):
            if s == 0:
                v = base[ai] + edge_q[e, ai, aj]
                cnt = edge_n[e, ai, aj]
            else:
                v = base[ai] + edge_q[e, aj, ai]
                cnt = edge_n[e, aj, ai]
            if with_bonus:
                v += _bonus(c, log_term, cnt)
            if v > best:
                best = v
        out[aj] = best


@njit(cache=True)
def _rounds(node_q, edge_q, edge_n, ptr, nbr, eid, side, n_actions, msgs,
            c, log_term, use_util, bonus_each_round, normalize, rounds, tol):
    """Run up to ``rounds`` sequential rounds in place; returns (rounds run, last max change)."""
    n = n_actions.shape[0]
    amax = msgs.shape[2] if msgs.shape[0] > 0 else 1
    base = np.empty(amax)
    new = np.empty(amax)
    delta = 0.0
    done = 0
    for _ in range(rounds):
        delta = 0.0
        for i in range(n):
            if ptr[i] == ptr[i + 1]:
                continue
            for p in range(ptr[i], ptr[i + 1]):
                j = nbr[p]
                _message(i, p, node_q, use_util, edge_q, edge_n, ptr, nbr, eid, side, n_actions, msgs,
                         c, log_term, bonus_each_round, base, new)
                aj_n = n_actions[j]
                if normalize:
                    mean = 0.0
                    for a in range(aj_n):
                        mean += new[a]
                    mean /= aj_n
                    if np.isfinite(mean):
                        for a in range(aj_n):
                            new[a] -= mean
                e = eid[p]
                s = side[p]
                for a in range(aj_n):
                    d = abs(new[a] - msgs[e, s, a])
                    if not d <= delta:  # also catches nan/inf changes
                        delta = d if np.isfinite(d) else np.inf
                    msgs[e, s, a] = new[a]
        done += 1
        if delta < tol:
            break
    return done, delta


@njit(cache=True)
def _bonus_messages(node_q, edge_q, edge_n, ptr, nbr, eid, side, n_actions, msgs,
                    c, log_term, use_util):
    """Messages recomputed once from ``msgs`` with the edge bonus added."""
    n = n_actions.shape[0]
    amax = msgs.shape[2] if msgs.shape[0] > 0 else 1
    out = np.zeros_like(msgs)
    base = np.empty(amax)
    new = np.empty(amax)
    for i in range(n):
        if ptr[i] == ptr[i + 1]:
            continue
        for p in range(ptr[i], ptr[i + 1]):
            _message(i, p, node_q, use_util, edge_q, edge_n, ptr, nbr, eid, side, n_actions, msgs,
                     c, log_term, True, base, new)
            j = nbr[p]
            for a in range(n_actions[j]):
                out[eid[p], side[p], a] = new[a]
    return out


@njit(cache=True)
def _select(node_q, node_n, ptr, eid, side, n_actions, msgs, c, log_term,
            use_util, node_bonus, tie):
    n = n_actions.shape[0]
    actions = np.zeros(n, dtype=np.int64)
    for i in range(n):
        best = -np.inf
        best_tie = -1.0
        best_a = 0
        for a in range(n_actions[i]):
            v = node_q[i, a] if use_util else 0.0
            for p in range(ptr[i], ptr[i + 1]):
                v += msgs[eid[p], 1 - side[p], a]
            if node_bonus:
                v += _bonus(c, log_term, node_n[i, a])
            t = tie[i, a]
            if v > best or (v == best and t > best_tie):
                best = v
                best_tie = t
                best_a = a
        actions[i] = best_a
    return actions


@njit(cache=True)
def _coordinate(node_q, node_n, edge_q, edge_n, ptr, nbr, eid, side, n_actions, c, log_term,
                use_util, node_bonus, edge_bonus, bonus_each_round, normalize, rounds, tol, tie):
    """Rounds, the optional final bonus pass and per-agent selection in one call."""
    amax = node_q.shape[1]
    msgs = np.zeros((eid.shape[0] // 2, 2, amax))
    if msgs.shape[0] > 0:
        _rounds(node_q, edge_q, edge_n, ptr, nbr, eid, side, n_actions, msgs,
                c, log_term, use_util, bonus_each_round, normalize, rounds, tol)
        if edge_bonus:
            msgs = _bonus_messages(node_q, edge_q, edge_n, ptr, nbr, eid, side, n_actions, msgs,
                                   c, log_term, use_util)
    return _select(node_q, node_n, ptr, eid, side, n_actions, msgs, c, log_term, use_util, node_bonus, tie)


def compute_message(i: int, j: int, stats: NodeEdgeStats, msgs: MessageTable, c_edge: float = 0.0,
                    use_node_utilities: bool = True) -> np.ndarray:
    """One Max-Plus message from agent ``i`` to neighbour ``j``, indexed by ``j``'s actions.

    ``c_edge > 0`` adds the UCB edge bonus inside the maximisation.
    """
    g = stats.graph
    ptr, nbr, eid, side = g.csr
    slots = [p for p in range(ptr[i], ptr[i + 1]) if nbr[p] == j]
    if not slots:
        raise KeyError(f"({i}, {j}) is not an edge")
    amax = msgs.values.shape[2]
    base = np.empty(amax)
    out = np.empty(amax)
    log_term = math.log(stats.visits + 1)
    _message(i, slots[0], stats.node_q, use_node_utilities, stats.edge_q, stats.edge_n, ptr, nbr, eid,
             side, stats.n_actions, msgs.values, float(c_edge), log_term, c_edge > 0, base, out)
    return out[: stats.n_actions[j]].copy()


def max_plus(g: CoordinationGraph, stats: NodeEdgeStats, cfg: MaxPlusConfig = MaxPlusConfig(),
             c: float = 0.0, rng: Optional[np.random.Generator] = None, return_messages: bool = False):
    """Select a joint action for the state summarised by ``stats``.

    Runs up to ``cfg.max_rounds`` rounds, stopping early once no message moves
    by more than ``cfg.tol`` or ``cfg.time_budget`` seconds have elapsed; at
    least one round always runs. Exploration bonuses are used only when
    ``c > 0``. Exact argmax ties go to the lowest action index, unless ``c > 0``
    and ``rng`` is given, in which case they are broken uniformly at random.

    Returns the joint action as an int array, plus the :class:`MessageTable`
    actually used for selection when ``return_messages`` is set.
    """
    n_actions = stats.n_actions
    if g.n_agents != n_actions.shape[0]:
        raise ValueError("graph and statistics disagree on the number of agents")
    if np.any(n_actions < 1):
        raise ValueError("every agent needs at least one action")
    if cfg.time_budget is None and not return_messages:
        return select_action(g, stats, cfg, c, rng)
    ptr, nbr, eid, side = g.csr
    amax = stats.node_q.shape[1]
    msgs = np.zeros((g.n_edges, 2, amax))
    explore = c > 0
    log_term = math.log(stats.visits + 1)
    bonus_each_round = explore and cfg.edge_exploration and cfg.edge_bonus_every_round
    args = (stats.node_q, stats.edge_q, stats.edge_n, ptr, nbr, eid, side, n_actions, msgs,
            float(c), log_term, cfg.use_node_utilities, bonus_each_round, cfg.message_normalization)

    if g.n_edges:
        if cfg.time_budget is None:
            _rounds(*args, cfg.max_rounds, cfg.tol)
        else:
            deadline = time.perf_counter() + cfg.time_budget
            for _ in range(cfg.max_rounds):
                _, delta = _rounds(*args, 1, cfg.tol)
                if delta < cfg.tol or time.perf_counter() >= deadline:
                    break
        if explore and cfg.edge_exploration and not cfg.edge_bonus_every_round:
            msgs = _bonus_messages(stats.node_q, stats.edge_q, stats.edge_n, ptr, nbr, eid, side,
                                   n_actions, msgs, float(c), log_term, cfg.use_node_utilities)

    if explore and rng is not None:
        tie = rng.random((g.n_agents, amax))
    else:
        tie = np.zeros((g.n_agents, amax))
    action = _select(stats.node_q, stats.node_n, ptr, eid, side, n_actions, msgs, float(c), log_term,
                     cfg.use_node_utilities, explore and cfg.node_exploration, tie)
    if return_messages:
        return action, MessageTable(g, n_actions, msgs)
    return action


def select_action(g: CoordinationGraph, stats: NodeEdgeStats, cfg: MaxPlusConfig, c: float = 0.0,
                  rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Unchecked fast path of :func:`max_plus` for round-count budgets."""
    ptr, nbr, eid, side = g.csr
    explore = c > 0
    if explore and rng is not None:
        tie = rng.random(stats.node_q.shape)
    else:
        tie = np.zeros(stats.node_q.shape)
    return _coordinate(stats.node_q, stats.node_n, stats.edge_q, stats.edge_n, ptr, nbr, eid, side,
                       stats.n_actions, float(c), math.log(stats.visits + 1), cfg.use_node_utilities,
                       explore and cfg.node_exploration,
                       explore and cfg.edge_exploration and not cfg.edge_bonus_every_round,
                       explore and cfg.edge_exploration and cfg.edge_bonus_every_round,
                       cfg.message_normalization, cfg.max_rounds, cfg.tol, tie)


def factored_value(g: CoordinationGraph, node_q, edge_q, action, use_node_utilities: bool = True) -> float:
    """Global payoff of ``action``: sum of agent utilities plus pairwise edge payoffs."""
    a = np.asarray(action)
    total = 0.0
    if use_node_utilities:
        total += float(sum(node_q[i, a[i]] for i in range(g.n_agents)))
    for e, (i, j) in enumerate(g.edges):
        total += float(edge_q[e, a[i], a[j]])
    return total
