"""Graph representation and BFS serialization.

A graph is turned into a model input in two steps: a breadth-first node
ordering (:func:`bfs_order`) and, per position in that ordering, a 0/1
vector marking edges to the ``k`` preceding nodes
(:func:`encode_adjacency_vectors`).
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np


class GraphError(ValueError):
    """Raised when a graph violates a structural precondition."""


def _norm_edge(u: int, v: int) -> tuple[int, int]:
    u, v = int(u), int(v)
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph on nodes ``0..n-1``.

    ``edges`` is kept as a sorted tuple of ``(u, v)`` pairs with ``u <= v``.
    Construction does not reject malformed input so that
    :func:`validate_graph` can report every problem at once; use
    :meth:`from_edges` to build a checked instance.
    """

    n: int
    edges: tuple[tuple[int, int], ...]
    communities: tuple[int, ...] | None = None
    meta: Mapping = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(sorted(_norm_edge(u, v) for u, v in self.edges)))
        if self.communities is not None:
            object.__setattr__(self, "communities", tuple(int(c) for c in self.communities))

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Sequence[int]], communities=None,
                   meta: Mapping | None = None, require_connected: bool = False) -> "Graph":
        g = cls(int(n), tuple(tuple(e) for e in edges), communities, dict(meta or {}))
        problems = validate_graph(g)
        if not require_connected:
            problems = [p for p in problems if not p.startswith("disconnected")]
        if problems:
            raise GraphError("; ".join(problems))
        return g

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def neighbors(self) -> tuple[tuple[int, ...], ...]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.edges:
            if u == v or not (0 <= u < self.n and 0 <= v < self.n):
                continue
            adj[u].append(v)
            adj[v].append(u)
        return tuple(tuple(sorted(set(a))) for a in adj)

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.neighbors], dtype=np.int64)

    @cached_property
    def edge_set(self) -> frozenset[tuple[int, int]]:
        return frozenset(self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        return _norm_edge(u, v) in self.edge_set

    def relabel(self, perm: Sequence[int]) -> "Graph":
        """Return the graph with node ``i`` renamed to ``perm[i]``."""
        perm = list(perm)
        comms = None
        if self.communities is not None:
            comms = [0] * self.n
            for i, c in enumerate(self.communities):
                comms[perm[i]] = c
        return Graph(self.n, tuple((perm[u], perm[v]) for u, v in self.edges), comms, dict(self.meta))


@dataclass(frozen=True)
class NodeSequence:
    """BFS node ordering plus the per-position adjacency vectors.

    ``vectors[i, j-1] == 1`` iff ``order[i]`` is adjacent to ``order[i-j]``
    for ``1 <= j <= min(i, k)``.
    """

    order: tuple[int, ...]
    vectors: np.ndarray
    k: int

    @property
    def n(self) -> int:
        return len(self.order)


def _levels(g: Graph, start: int) -> list[list[int]]:
    seen = np.zeros(g.n, dtype=bool)
    seen[start] = True
    levels = [[start]]
    while True:
        nxt = set()
        for u in levels[-1]:
            for v in g.neighbors[u]:
                if not seen[v]:
                    nxt.add(v)
        if not nxt:
            break
        for v in nxt:
            seen[v] = True
        levels.append(sorted(nxt, key=lambda v: (-g.degrees[v], v)))
    unreached = int(g.n - seen.sum())
    if unreached:
        raise GraphError(f"graph is disconnected: {unreached} node(s) unreachable from node {start}")
    return levels


def bfs_order(g: Graph, start: int = 0) -> tuple[int, ...]:
    """Breadth-first node ordering from ``start``.

    Nodes of the same depth are sorted by descending degree, then by
    ascending index, so the result is fully determined by ``(g, start)``.
    """
    if not 0 <= start < g.n:
        raise GraphError(f"start node {start} out of range [0, {g.n})")
    return tuple(v for level in _levels(g, start) for v in level)


def encode_adjacency_vectors(g: Graph, order: Sequence[int], k: int) -> NodeSequence:
    """Fixed-length 0/1 connectivity to the ``k`` previous nodes in ``order``.

    Edges reaching further back than ``k`` positions are dropped from the
    encoding only.
    """
    if k < 1:
        raise ValueError(f"adjacency vector size must be >= 1, got {k}")
    order = tuple(int(v) for v in order)
    if sorted(order) != list(range(g.n)):
        raise GraphError("order is not a permutation of the graph's nodes")
    pos = np.empty(g.n, dtype=np.int64)
    pos[list(order)] = np.arange(g.n)
    vectors = np.zeros((g.n, k), dtype=np.float64)
    for u, v in g.edges:
        i, j = pos[u], pos[v]
        if i < j:
            i, j = j, i
        back = i - j
        if 1 <= back <= k:
            vectors[i, back - 1] = 1.0
    vectors.setflags(write=False)
    return NodeSequence(order, vectors, k)


def bfs_width_bound(g: Graph, order: Sequence[int]) -> int:
    """Maximum BFS level width ``M`` for the traversal rooted at ``order[0]``.

    Edges of a BFS ordering only join nodes of the same or adjacent levels,
    so every edge spans at most ``2 * M`` positions of ``order``.
    """
    return max(len(level) for level in _levels(g, int(order[0])))


def skip_predecessors(g: Graph, order: Sequence[int]) -> list[list[int]]:
    """Positions of earlier nodes joined to each position by a real edge.

    The immediate sequence predecessor is excluded; its state already
    reaches the cell through the chain link.
    """
    pos = np.empty(g.n, dtype=np.int64)
    pos[list(order)] = np.arange(g.n)
    preds: list[list[int]] = [[] for _ in range(g.n)]
    for u, v in g.edges:
        i, j = int(pos[u]), int(pos[v])
        if i < j:
            i, j = j, i
        if i - j >= 2:
            preds[i].append(j)
    for p in preds:
        p.sort()
    return preds


def wl_hash(g: Graph, rounds: int = 3) -> str:
    """Weisfeiler-Lehman color refinement digest.

    Isomorphic graphs always hash equal. The converse does not hold: 1-WL
    cannot tell apart some regular graphs (e.g. C6 and two disjoint
    triangles).
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    colors = [str(int(d)) for d in g.degrees]
    history = [sorted(Counter(colors).items())]
    for _ in range(rounds):
        colors = [
            hashlib.blake2b(
                (colors[u] + "|" + ",".join(sorted(colors[v] for v in g.neighbors[u]))).encode(),
                digest_size=8,
            ).hexdigest()
            for u in range(g.n)
        ]
        history.append(sorted(Counter(colors).items()))
    return hashlib.sha256(repr((g.n, g.m, history)).encode()).hexdigest()


def is_connected(g: Graph) -> bool:
    if g.n == 0:
        return False
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in g.neighbors[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == g.n


def validate_graph(g: Graph) -> list[str]:
    """Return every structural violation; an empty list means the graph is ok."""
    problems = []
    if g.n < 1:
        problems.append(f"node count must be >= 1, got {g.n}")
    seen = set()
    for u, v in g.edges:
        if not (0 <= u < g.n and 0 <= v < g.n):
            problems.append(f"edge ({u}, {v}) has an endpoint outside [0, {g.n})")
        if u == v:
            problems.append(f"self-loop at node {u}")
        if (u, v) in seen:
            problems.append(f"duplicate edge ({u}, {v})")
        seen.add((u, v))
    if g.communities is not None:
        if len(g.communities) != g.n:
            problems.append(f"communities has length {len(g.communities)}, expected {g.n}")
        if any(c < 0 for c in g.communities):
            problems.append("community ids must be >= 0")
    if g.n >= 1 and not is_connected(g):
        problems.append("disconnected graph")
    return problems
