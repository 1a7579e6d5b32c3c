"""Exact joint-action selection by variable elimination.

Payoff functions are dense numpy tables over the actions of their scope
(agents in ascending order). Eliminating agent ``k`` sums every active
function that mentions ``k`` and maximises ``k`` out, remembering the
maximising action for each assignment of the remaining scope. After all
agents are gone the best responses are replayed in reverse order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .cg import CoordinationGraph
from .stats import ComponentStats

MAX_SCOPE_DIMS = 12
MAX_TABLE_ENTRIES = 1 << 24


class InducedWidthError(MemoryError):
    """Raised when an elimination step would build an intractably large table."""


@dataclass
class IntermediatePayoff:
    scope: tuple[int, ...]
    table: np.ndarray
    best_response: Optional[np.ndarray] = None
    eliminated: Optional[int] = None


def eliminate_agent(k: int, active: list, n_actions: Sequence[int],
                    max_dims: int = MAX_SCOPE_DIMS, max_entries: int = MAX_TABLE_ENTRIES) -> IntermediatePayoff:
    """Maximise agent ``k`` out of the active payoff functions.

    Functions whose scope contains ``k`` are removed from ``active`` and the
    new function over the union of their scopes (minus ``k``) is appended.
    ``best_response`` holds the maximising action of ``k`` (lowest index on
    ties) for each assignment of the new scope.
    """
    collected = [f for f in active if k in f.scope]
    if not collected:
        new = IntermediatePayoff((), np.array(0.0), np.array(0, dtype=np.int64), k)
        active.append(new)
        return new
    union = sorted(set().union(*(f.scope for f in collected)))
    if len(union) > max_dims:
        raise InducedWidthError(f"eliminating agent {k} needs a {len(union)}-dimensional table")
    shape = tuple(int(n_actions[v]) for v in union)
    if math.prod(shape) > max_entries:
        raise InducedWidthError(f"eliminating agent {k} needs a table of {math.prod(shape)} entries")

    total = np.zeros(shape)
    for f in collected:
        total = total + f.table.reshape([shape[p] if v in f.scope else 1 for p, v in enumerate(union)])
    axis = union.index(k)
    new = IntermediatePayoff(
        scope=tuple(v for v in union if v != k),
        table=total.max(axis=axis),
        best_response=total.argmax(axis=axis),
        eliminated=k,
    )
    for f in collected:
        active.remove(f)
    active.append(new)
    return new


def component_utilities(stats: ComponentStats, c: float) -> np.ndarray:
    """Flat ``Q_e + c * sqrt(log N(s) / n_e)`` over every component entry.

    Unvisited entries (and every entry while ``N(s) == 0``) get ``+inf`` when
    ``c > 0``; with ``c == 0`` the bare means are returned.
    """
    return _utilities(stats.comp_q, stats.comp_n, stats.visits, float(c))


class EliminationPlan:
    """Symbolic elimination of pairwise components under a fixed order.

    Scopes depend only on the graph, the order and the action counts, so they
    are worked out once. Each step stores, for every (new-scope assignment,
    eliminated action) row, the flat buffer positions of the collected tables;
    :func:`_run_plan` then only gathers, sums and maximises.
    """

    def __init__(self, components, order, n_actions,
                 max_dims: int = MAX_SCOPE_DIMS, max_entries: int = MAX_TABLE_ENTRIES):
        n_actions = np.asarray(n_actions, dtype=np.int64)
        self.order = [int(k) for k in order]
        scopes = [tuple(c) for c in components]
        sizes = [int(np.prod([n_actions[v] for v in c])) for c in scopes]
        offsets = list(np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64))
        self.base_size = int(offsets[-1])
        active = list(range(len(scopes)))
        gathers, gather_off, n_coll = [], [0], []
        new_off, br_off, elim, rows = [], [0], [], []
        scope_flat, scope_off, stride_flat = [], [0], []
        total_entries = 0
        for k in self.order:
            collected = [f for f in active if k in scopes[f]]
            union = sorted(set(k_ for f in collected for k_ in scopes[f]) | {k})
            if len(union) > max_dims:
                raise InducedWidthError(f"eliminating agent {k} needs a {len(union)}-dimensional table")
            new_scope = tuple(v for v in union if v != k)
            shape = [int(n_actions[v]) for v in new_scope] + [int(n_actions[k])]
            n_rows = math.prod(shape)
            total_entries += n_rows * max(1, len(collected))
            if n_rows > max_entries or total_entries > max_entries:
                raise InducedWidthError(f"eliminating agent {k} needs a table of {n_rows} entries")
            grid = np.indices(shape).reshape(len(shape), -1)
            pos = {v: grid[p] for p, v in enumerate(list(new_scope) + [k])}
            g = np.empty((n_rows, len(collected)), dtype=np.int64)
            for col, f in enumerate(collected):
                idx = np.full(n_rows, offsets[f], dtype=np.int64)
                stride = 1
                for v in reversed(scopes[f]):
                    idx += pos[v] * stride
                    stride *= int(n_actions[v])
                g[:, col] = idx
            gathers.append(g.ravel())
            gather_off.append(gather_off[-1] + g.size)
            n_coll.append(len(collected))
            table_size = n_rows // int(n_actions[k])
            new_off.append(int(offsets[-1]))
            offsets.append(offsets[-1] + table_size)
            br_off.append(br_off[-1] + table_size)
            elim.append(k)
            rows.append(table_size)
            strides, stride = [], 1
            for v in reversed(new_scope):
                strides.append(stride)
                stride *= int(n_actions[v])
            scope_flat.extend(new_scope)
            stride_flat.extend(reversed(strides))
            scope_off.append(len(scope_flat))
            scopes.append(new_scope)
            active = [f for f in active if f not in collected] + [len(scopes) - 1]
        as_i64 = lambda x: np.asarray(x, dtype=np.int64)  # noqa: E731
        self.buffer_size = int(offsets[-1])
        self.gather = np.concatenate(gathers) if gathers else np.zeros(0, dtype=np.int64)
        self.gather_off = as_i64(gather_off)
        self.n_collected = as_i64(n_coll)
        self.new_off = as_i64(new_off)
        self.br_off = as_i64(br_off)
        self.elim = as_i64(elim)
        self.rows = as_i64(rows)
        self.scope = as_i64(scope_flat)
        self.scope_off = as_i64(scope_off)
        self.scope_stride = as_i64(stride_flat)
        self.n_actions = n_actions

    def run(self, utilities: np.ndarray) -> np.ndarray:
        return _run_plan(utilities, self.buffer_size, self.gather, self.gather_off, self.n_collected,
                         self.new_off, self.br_off, self.elim, self.rows, self.n_actions,
                         self.scope, self.scope_off, self.scope_stride)


@njit(cache=True)
def _run_plan(util, buffer_size, gather, gather_off, n_coll, new_off, br_off, elim, rows, n_actions,
              scope, scope_off, scope_stride):
    buf = np.empty(buffer_size)
    buf[: util.shape[0]] = util
    br = np.zeros(br_off[-1], dtype=np.int64)
    for t in range(elim.shape[0]):
        ak_n = n_actions[elim[t]]
        nc = n_coll[t]
        g0 = gather_off[t]
        for r in range(rows[t]):
            best = -np.inf
            arg = 0
            for ak in range(ak_n):
                row = r * ak_n + ak
                v = 0.0
                for f in range(nc):
                    v += buf[gather[g0 + row * nc + f]]
                if v > best:
                    best = v
                    arg = ak
            buf[new_off[t] + r] = best
            br[br_off[t] + r] = arg
    action = np.zeros(n_actions.shape[0], dtype=np.int64)
    for t in range(elim.shape[0] - 1, -1, -1):
        idx = 0
        for p in range(scope_off[t], scope_off[t + 1]):
            idx += action[scope[p]] * scope_stride[p]
        action[elim[t]] = br[br_off[t] + idx]
    return action


@njit(cache=True)
def _utilities(comp_q, comp_n, visits, c):
    out = comp_q.copy()
    if c <= 0:
        return out
    if visits == 0:
        out[:] = np.inf
        return out
    log_n = math.log(visits)
    for k in range(out.shape[0]):
        if comp_n[k] == 0:
            out[k] = np.inf
        else:
            out[k] += c * math.sqrt(log_n / comp_n[k])
    return out


_PLANS: dict = {}


def elimination_plan(stats: ComponentStats, order, max_dims: int = MAX_SCOPE_DIMS,
                     max_entries: int = MAX_TABLE_ENTRIES) -> EliminationPlan:
    key = (tuple(stats.components), tuple(order), stats.n_actions.tobytes(), max_dims, max_entries)
    plan = _PLANS.get(key)
    if plan is None:
        if len(_PLANS) > 4096:
            _PLANS.clear()
        plan = _PLANS[key] = EliminationPlan(stats.components, order, stats.n_actions, max_dims, max_entries)
    return plan


def var_el_select(g: CoordinationGraph, stats: ComponentStats, order: Sequence[int], c: float = 0.0,
                  max_dims: int = MAX_SCOPE_DIMS, max_entries: int = MAX_TABLE_ENTRIES) -> np.ndarray:
    """Joint action maximising the sum of UCB-augmented component payoffs exactly.

    Component tables get ``c * sqrt(log N(s) / n_e)`` added (``+inf`` for
    unvisited entries, and for all entries while ``N(s) == 0``; nothing when
    ``c == 0``), agents are eliminated in ``order`` and best responses are
    replayed backwards. Ties go to the lowest action index.
    """
    if stats is None or not stats.components:
        raise ValueError("no component statistics to select from")
    if len(order) != g.n_agents or sorted(order) != list(range(g.n_agents)):
        raise ValueError(f"elimination order {list(order)} is not a permutation of {g.n_agents} agents")
    plan = elimination_plan(stats, order, max_dims, max_entries)
    return plan.run(component_utilities(stats, c))


def var_el_select_tables(components, tables, order, n_actions,
                         max_dims: int = MAX_SCOPE_DIMS, max_entries: int = MAX_TABLE_ENTRIES) -> np.ndarray:
    """Reference path: eliminate explicit payoff tables one agent at a time with :func:`eliminate_agent`."""
    active = [IntermediatePayoff(tuple(c), np.asarray(t, dtype=float)) for c, t in zip(components, tables)]
    steps = [eliminate_agent(k, active, n_actions, max_dims, max_entries) for k in order]
    action = np.zeros(len(n_actions), dtype=np.int64)
    for step in reversed(steps):
        action[step.eliminated] = step.best_response[tuple(action[v] for v in step.scope)]
    return action


def component_value(components, tables, action) -> float:
    """Sum of component tables evaluated at ``action``."""
    a = np.asarray(action)
    return float(sum(t[tuple(a[v] for v in comp)] for comp, t in zip(components, tables)))
