"""Oracle checks runnable without the test suite.

Each check compares a library routine with an independent brute-force or
direct computation on random small instances.
"""

from __future__ import annotations

import itertools
from typing import Callable, TextIO

import numpy as np

from ..cg import CoordinationGraph, varel_components
from ..maxplus import MaxPlusConfig, factored_value, max_plus
from ..stats import ComponentStats, NodeEdgeStats
from ..varel import component_value, var_el_select


def _brute_max(n_actions, value: Callable) -> float:
    return max(value(np.array(a)) for a in itertools.product(*(range(k) for k in n_actions)))


def _random_graph(rng, n: int, p: float = 0.5) -> CoordinationGraph:
    return CoordinationGraph(n, [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p])


def _random_tree(rng, n: int) -> CoordinationGraph:
    return CoordinationGraph(n, [(int(rng.integers(0, i)), i) for i in range(1, n)])


def check_varel(trials: int = 200, seed: int = 0) -> bool:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        n = int(rng.integers(1, 6))
        g = _random_graph(rng, n)
        na = rng.integers(1, 4, n)
        st = ComponentStats(g, na)
        st.comp_q[:] = rng.uniform(-10, 10, st.comp_q.shape)
        order = [int(v) for v in rng.permutation(n)]
        comps = varel_components(g)
        tables = [st.table(e) for e in range(len(comps))]
        got = component_value(comps, tables, var_el_select(g, st, order, 0.0))
        if got != _brute_max(na, lambda a: component_value(comps, tables, a)):
            return False
    return True


def check_maxplus_tree(trials: int = 200, seed: int = 1) -> bool:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        n = int(rng.integers(1, 7))
        g = _random_tree(rng, n)
        na = rng.integers(1, 4, n)
        st = NodeEdgeStats(g, na)
        st.node_q[:] = rng.uniform(-10, 10, st.node_q.shape)
        st.edge_q[:] = rng.uniform(-10, 10, st.edge_q.shape)
        a = max_plus(g, st, MaxPlusConfig(max_rounds=n), 0.0)
        best = _brute_max(na, lambda x: factored_value(g, st.node_q, st.edge_q, x))
        if not np.isclose(factored_value(g, st.node_q, st.edge_q, a), best, rtol=0, atol=1e-9):
            return False
    return True


def check_running_means(trials: int = 50, seed: int = 2) -> bool:
    rng = np.random.default_rng(seed)
    for _ in range(trials):
        n = int(rng.integers(1, 5))
        g = _random_graph(rng, n)
        na = rng.integers(1, 4, n)
        ne, cs = NodeEdgeStats(g, na), ComponentStats(g, na)
        seen: dict = {}
        for _ in range(int(rng.integers(1, 60))):
            a = rng.integers(0, na)
            q = rng.normal(0, 5, n)
            ne.update(a, q)
            cs.update(a, q.sum())
            for i in range(n):
                seen.setdefault(("node", i, a[i]), []).append(q[i])
            for e, (i, j) in enumerate(g.edges):
                seen.setdefault(("edge", e, a[i], a[j]), []).append(q[i] + q[j])
            for e, comp in enumerate(cs.components):
                seen.setdefault(("comp", e, tuple(a[list(comp)])), []).append(q.sum())
        for key, xs in seen.items():
            if key[0] == "node":
                got = ne.node_q[key[1], key[2]]
            elif key[0] == "edge":
                got = ne.edge_q[key[1], key[2], key[3]]
            else:
                got = cs.table(key[1])[key[2]]
            if abs(got - float(np.mean(xs))) > 1e-9:
                return False
    return True


CHECKS = {
    "variable elimination matches enumeration": check_varel,
    "max-plus is exact on trees": check_maxplus_tree,
    "running means match direct means": check_running_means,
}


def run_selfcheck(out: TextIO) -> bool:
    ok = True
    for name, fn in CHECKS.items():
        passed = fn()
        ok &= passed
        out.write(f"{'PASS' if passed else 'FAIL'}  {name}\n")
    return ok
