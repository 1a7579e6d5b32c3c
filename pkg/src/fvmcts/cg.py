"""Coordination graphs over agents.

A coordination graph has one node per agent and an undirected edge wherever
two agents' payoffs are coupled. Besides neighbourhood queries this module
builds the pairwise payoff components used by variable elimination and a
min-degree elimination order.
"""

from __future__ import annotations

from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
from numba import njit


class CoordinationGraph:
    """Immutable undirected graph over ``n_agents`` agents.

    Edges are stored as sorted ``(i, j)`` pairs with ``i < j`` in ascending
    order, so two graphs with the same edge set compare equal and hash the
    same regardless of how they were built.
    """

    def __init__(self, n_agents: int, edges: Iterable[Sequence[int]] = ()):
        n_agents = int(n_agents)
        if n_agents < 1:
            raise ValueError(f"n_agents must be positive, got {n_agents}")
        canon = set()
        for e in edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise ValueError(f"self-loop on agent {i}")
            if not (0 <= i < n_agents and 0 <= j < n_agents):
                raise ValueError(f"edge ({i}, {j}) out of range for {n_agents} agents")
            canon.add((min(i, j), max(i, j)))
        self.n_agents = n_agents
        self.edges: tuple[tuple[int, int], ...] = tuple(sorted(canon))

    @classmethod
    def from_canonical(cls, n_agents: int, edges: np.ndarray) -> "CoordinationGraph":
        """Trusted constructor from an ``(m, 2)`` int array of sorted ``i < j`` pairs in ascending order."""
        g = cls.__new__(cls)
        g.n_agents = int(n_agents)
        g.edges = tuple(map(tuple, edges.tolist()))
        g.edge_src = np.ascontiguousarray(edges[:, 0], dtype=np.int64)
        g.edge_dst = np.ascontiguousarray(edges[:, 1], dtype=np.int64)
        return g

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n_agents)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return tuple(tuple(sorted(a)) for a in adj)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def __eq__(self, other):
        if not isinstance(other, CoordinationGraph):
            return NotImplemented
        return self.n_agents == other.n_agents and self.edges == other.edges

    def __hash__(self):
        return hash((self.n_agents, self.edges))

    def __repr__(self):
        return f"CoordinationGraph(n_agents={self.n_agents}, edges={list(self.edges)})"

    # Flat array views consumed by the compiled kernels. For agent i, the
    # slots nbr_ptr[i]:nbr_ptr[i+1] list its neighbours, the edge id joining
    # them, and whether i is the lower endpoint (direction 0) of that edge.

    @cached_property
    def edge_src(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=np.int64)

    @cached_property
    def edge_dst(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=np.int64)

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        return _csr(self.n_agents, self.edge_src, self.edge_dst)


@njit(cache=True)
def _csr(n, src, dst):
    m = src.shape[0]
    ptr = np.zeros(n + 1, dtype=np.int64)
    for e in range(m):
        ptr[src[e] + 1] += 1
        ptr[dst[e] + 1] += 1
    for i in range(n):
        ptr[i + 1] += ptr[i]
    fill = ptr[:-1].copy()
    nbr = np.empty(2 * m, dtype=np.int64)
    eid = np.empty(2 * m, dtype=np.int64)
    side = np.empty(2 * m, dtype=np.int64)
    # Edges ascend by (src, dst), so each agent's slots come out sorted by neighbour
    # if the lower-neighbour slots (side 1) are laid down first.
    for e in range(m):
        j = dst[e]
        nbr[fill[j]] = src[e]
        eid[fill[j]] = e
        side[fill[j]] = 1
        fill[j] += 1
    for e in range(m):
        i = src[e]
        nbr[fill[i]] = dst[e]
        eid[fill[i]] = e
        side[fill[i]] = 0
        fill[i] += 1
    return ptr, nbr, eid, side


def neighbors(g: CoordinationGraph, i: int) -> list[int]:
    """Neighbours of agent ``i`` in ascending index order."""
    if not 0 <= i < g.n_agents:
        raise IndexError(f"agent {i} out of range for {g.n_agents} agents")
    return list(g.adjacency[i])


def varel_components(g: CoordinationGraph) -> list[tuple[int, ...]]:
    """Pairwise payoff components: one per edge, plus a singleton per isolated agent.

    Components are ordered with edges first (in ``g.edges`` order), followed by
    isolated agents in index order.
    """
    comps: list[tuple[int, ...]] = [tuple(e) for e in g.edges]
    comps.extend((i,) for i in range(g.n_agents) if not g.adjacency[i])
    return comps


def elimination_order(g: CoordinationGraph) -> list[int]:
    """Greedy min-degree elimination order with fill-in, ties to the lowest index."""
    adj = [set(a) for a in g.adjacency]
    remaining = set(range(g.n_agents))
    order = []
    while remaining:
        k = min(remaining, key=lambda v: (len(adj[v]), v))
        nbrs = adj[k]
        for u in nbrs:
            adj[u].discard(k)
            adj[u].update(nbrs - {u})
        remaining.discard(k)
        adj[k] = set()
        order.append(k)
    return order


def complete_graph(n_agents: int) -> CoordinationGraph:
    return CoordinationGraph(n_agents, [(i, j) for i in range(n_agents) for j in range(i + 1, n_agents)])


def is_tree(g: CoordinationGraph) -> bool:
    """True when ``g`` is acyclic (a forest)."""
    parent = list(range(g.n_agents))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in g.edges:
        ri, rj = find(i), find(j)
        if ri == rj:
            return False
        parent[ri] = rj
    return True
