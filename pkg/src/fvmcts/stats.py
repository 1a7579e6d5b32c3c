"""Per-joint-state search statistics for factored-value tree search.

Two layouts are kept, one per coordination backend:

* :class:`NodeEdgeStats` (Max-Plus): per-agent ``(N_i, Q_i)`` over individual
  actions and per-edge ``(N_ij, Q_ij)`` over pairwise actions, updated from the
  per-agent return vector.
* :class:`ComponentStats` (variable elimination): per-component ``(n_e, Q_e)``
  over local component actions, updated from the scalar team return.

Each entry also carries the state visit count ``N(s)``. A :class:`StatsStore`
maps canonical state keys to entries and creates zeroed entries lazily.
"""

from __future__ import annotations

import csv
import io
from typing import TextIO

import numpy as np
from numba import njit

from .cg import CoordinationGraph, varel_components


@njit(cache=True)
def _update_node_edge(node_n, node_q, edge_n, edge_q, src, dst, a, q):
    for i in range(a.shape[0]):
        ai = a[i]
        node_n[i, ai] += 1
        node_q[i, ai] += (q[i] - node_q[i, ai]) / node_n[i, ai]
    for e in range(src.shape[0]):
        i = src[e]
        j = dst[e]
        ai = a[i]
        aj = a[j]
        edge_n[e, ai, aj] += 1
        qe = q[i] + q[j]
        edge_q[e, ai, aj] += (qe - edge_q[e, ai, aj]) / edge_n[e, ai, aj]


@njit(cache=True)
def _update_components(comp_n, comp_q, offsets, first, second, stride, a, q):
    for e in range(offsets.shape[0] - 1):
        k = offsets[e] + a[first[e]] * stride[e]
        if second[e] >= 0:
            k += a[second[e]]
        comp_n[k] += 1
        comp_q[k] += (q - comp_q[k]) / comp_n[k]


class NodeEdgeStats:
    """Node and edge statistics for one joint state (Max-Plus layout)."""

    def __init__(self, graph: CoordinationGraph, n_actions):
        self.graph = graph
        self.n_actions = np.asarray(n_actions, dtype=np.int64)
        amax = int(self.n_actions.max())
        n, m = graph.n_agents, graph.n_edges
        self.visits = 0
        self.node_n = np.zeros((n, amax), dtype=np.int64)
        self.node_q = np.zeros((n, amax))
        self.edge_n = np.zeros((m, amax, amax), dtype=np.int64)
        self.edge_q = np.zeros((m, amax, amax))

    @property
    def entries(self) -> int:
        na = self.n_actions
        g = self.graph
        return int(na.sum()) + int(np.dot(na[g.edge_src], na[g.edge_dst]))

    def update(self, action, returns) -> None:
        a = np.asarray(action, dtype=np.int64)
        q = np.asarray(returns, dtype=np.float64)
        if q.shape != (self.graph.n_agents,):
            raise ValueError(f"expected {self.graph.n_agents} per-agent returns, got shape {q.shape}")
        self.add(a, q)

    def add(self, a: np.ndarray, q: np.ndarray) -> None:
        """Unchecked update from an int64 action array and float64 return vector."""
        self.visits += 1
        _update_node_edge(self.node_n, self.node_q, self.edge_n, self.edge_q,
                          self.graph.edge_src, self.graph.edge_dst, a, q)

    def rows(self):
        na = self.n_actions
        for i in range(self.graph.n_agents):
            for ai in range(na[i]):
                yield "node", (i,), (ai,), int(self.node_n[i, ai]), float(self.node_q[i, ai])
        for e, (i, j) in enumerate(self.graph.edges):
            for ai in range(na[i]):
                for aj in range(na[j]):
                    yield "edge", (i, j), (ai, aj), int(self.edge_n[e, ai, aj]), float(self.edge_q[e, ai, aj])


_LAYOUTS: dict = {}


def _component_layout(components, n_actions):
    if not components:
        raise ValueError("no components")
    if any(len(c) > 2 for c in components):
        raise ValueError("only singleton and pairwise components are supported")
    comps = [tuple(int(v) for v in c) for c in components]
    sizes = [int(np.prod([n_actions[v] for v in c])) for c in comps]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    first = np.array([c[0] for c in comps], dtype=np.int64)
    second = np.array([c[1] if len(c) > 1 else -1 for c in comps], dtype=np.int64)
    stride = np.array([n_actions[c[1]] if len(c) > 1 else 1 for c in comps], dtype=np.int64)
    return comps, offsets, first, second, stride


class ComponentStats:
    """Local component statistics for one joint state (variable elimination layout).

    Tables for all components live in one flat array; ``table(e)`` returns a
    reshaped view for component ``e``.
    """

    def __init__(self, graph: CoordinationGraph, n_actions, components=None):
        self.graph = graph
        self.n_actions = np.asarray(n_actions, dtype=np.int64)
        comps = list(components) if components is not None else varel_components(graph)
        key = (graph, tuple(comps), self.n_actions.tobytes())
        layout = _LAYOUTS.get(key)
        if layout is None:
            layout = _LAYOUTS[key] = _component_layout(comps, self.n_actions)
        self.components, self.offsets, self.first, self.second, self.stride = layout
        self.visits = 0
        self.comp_n = np.zeros(self.offsets[-1], dtype=np.int64)
        self.comp_q = np.zeros(self.offsets[-1])

    @property
    def entries(self) -> int:
        return int(self.offsets[-1])

    def shape(self, e: int) -> tuple[int, ...]:
        return tuple(int(self.n_actions[v]) for v in self.components[e])

    def table(self, e: int, which: str = "q") -> np.ndarray:
        flat = self.comp_q if which == "q" else self.comp_n
        return flat[self.offsets[e]:self.offsets[e + 1]].reshape(self.shape(e))

    def update(self, action, team_return: float) -> None:
        self.add(np.asarray(action, dtype=np.int64), float(team_return))

    def add(self, a: np.ndarray, q: float) -> None:
        """Unchecked update from an int64 action array and a float team return."""
        self.visits += 1
        _update_components(self.comp_n, self.comp_q, self.offsets, self.first, self.second, self.stride, a, q)

    def rows(self):
        for e, comp in enumerate(self.components):
            n_tab = self.table(e, "n")
            q_tab = self.table(e, "q")
            for idx in np.ndindex(*self.shape(e)):
                yield "component", comp, idx, int(n_tab[idx]), float(q_tab[idx])


def state_key(state) -> bytes:
    """Canonical serialization of a joint state (agent-ordered array bytes)."""
    return np.asarray(state).tobytes()


class StatsStore:
    """Map from joint-state key to per-state statistics.

    ``mode`` is ``"maxplus"`` or ``"varel"``. The model supplies the
    coordination graph and per-agent action counts of each state on first
    visit; ``key_fn`` defaults to :func:`state_key`.
    """

    def __init__(self, model, mode: str = "maxplus", key_fn=None):
        if mode not in ("maxplus", "varel"):
            raise ValueError(f"unknown statistics mode {mode!r}")
        self.model = model
        self.mode = mode
        self.key_fn = key_fn or getattr(model, "state_key", state_key)
        self._entries: dict = {}
        self.peak_entries = 0
        self.total_entries = 0

    def __len__(self):
        return len(self._entries)

    def __contains__(self, state):
        return self.key_fn(state) in self._entries

    def lookup_or_init(self, state):
        key = self.key_fn(state)
        entry = self._entries.get(key)
        if entry is None:
            graph = self.model.coordination_graph(state)
            n_actions = self.model.action_counts(state)
            if self.mode == "maxplus":
                entry = NodeEdgeStats(graph, n_actions)
            else:
                entry = ComponentStats(graph, n_actions)
            self._entries[key] = entry
            size = entry.entries
            self.total_entries += size
            if size > self.peak_entries:
                self.peak_entries = size
        return entry

    def get(self, state):
        return self._entries.get(self.key_fn(state))

    def dump_csv(self, state, out: TextIO | None = None) -> str:
        """Write one CSV row per statistic of ``state``; returns the text."""
        entry = self.get(state)
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["state", "kind", "indices", "actions", "N", "Q"])
        if entry is not None:
            key = self.key_fn(state).hex()
            for kind, idx, act, n, q in entry.rows():
                writer.writerow([key, kind, " ".join(map(str, idx)), " ".join(map(str, act)), n, f"{q:.6g}"])
        text = buf.getvalue()
        if out is not None:
            out.write(text)
        return text


def update_maxplus_stats(store: StatsStore, state, action, returns, graph: CoordinationGraph | None = None):
    entry = store.lookup_or_init(state)
    if graph is not None and graph != entry.graph:
        raise ValueError("coordination graph does not match the stored graph for this state")
    entry.update(action, returns)
    return entry


def update_varel_stats(store: StatsStore, state, action, team_return, components=None):
    entry = store.lookup_or_init(state)
    if components is not None and [tuple(c) for c in components] != entry.components:
        raise ValueError("components do not match the stored components for this state")
    entry.update(action, team_return)
    return entry


def lookup_or_init(store: StatsStore, state):
    return store.lookup_or_init(state)
