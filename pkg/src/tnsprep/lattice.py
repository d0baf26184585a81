"""Qubit graphs: distances, region radii and neighbourhood balls.

Vertices are dense integers ``0..N-1``. Graphs may be disconnected; the
distance between vertices in different components is :data:`UNREACHABLE`.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

import numpy as np

UNREACHABLE = -1


def _normalize_edge(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True, init=False)
class Graph:
    """Undirected simple graph on vertices ``0..vertex_count-1``."""

    vertex_count: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __init__(self, vertex_count: int, edges: Iterable[tuple[int, int]] = ()):
        if int(vertex_count) < 1:
            raise ValueError(f"vertex_count must be positive, got {vertex_count}")
        n = int(vertex_count)
        normalized: set[tuple[int, int]] = set()
        for a, b in edges:
            a, b = int(a), int(b)
            if a == b:
                raise ValueError(f"self-loop at vertex {a}")
            if not (0 <= a < n and 0 <= b < n):
                raise ValueError(f"edge ({a}, {b}) has endpoint outside 0..{n - 1}")
            e = _normalize_edge(a, b)
            if e in normalized:
                raise ValueError(f"duplicate edge {e}")
            normalized.add(e)
        object.__setattr__(self, "vertex_count", n)
        object.__setattr__(self, "edges", frozenset(normalized))

    @cached_property
    def adjacency(self) -> tuple[tuple[int, ...], ...]:
        nbrs: list[list[int]] = [[] for _ in range(self.vertex_count)]
        for a, b in self.edges:
            nbrs[a].append(b)
            nbrs[b].append(a)
        return tuple(tuple(sorted(n)) for n in nbrs)

    @property
    def degree_bound(self) -> int:
        return max((len(n) for n in self.adjacency), default=0)

    @cached_property
    def distance_matrix(self) -> np.ndarray:
        """All-pairs BFS distances; unreachable pairs hold ``UNREACHABLE``."""
        n = self.vertex_count
        dist = np.full((n, n), UNREACHABLE, dtype=int)
        for source in range(n):
            dist[source] = _bfs(self.adjacency, source)
        dist.setflags(write=False)
        return dist

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def check_vertex(self, v: int) -> int:
        if not 0 <= int(v) < self.vertex_count:
            raise ValueError(f"invalid vertex {v} for graph with {self.vertex_count} vertices")
        return int(v)


def _bfs(adjacency: tuple[tuple[int, ...], ...], source: int) -> np.ndarray:
    dist = np.full(len(adjacency), UNREACHABLE, dtype=int)
    dist[source] = 0
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for w in adjacency[u]:
            if dist[w] == UNREACHABLE:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


class Region(tuple):
    """Sorted, duplicate-free tuple of vertex ids."""

    def __new__(cls, vertices: Iterable[int] = ()):
        vs = sorted({int(v) for v in vertices})
        if vs and vs[0] < 0:
            raise ValueError(f"negative vertex id {vs[0]}")
        return super().__new__(cls, vs)

    def validate(self, g: Graph) -> Region:
        for v in self:
            g.check_vertex(v)
        return self

    def __or__(self, other: Iterable[int]) -> Region:  # type: ignore[override]
        return Region((*self, *other))

    def __and__(self, other: Iterable[int]) -> Region:
        other = set(other)
        return Region(v for v in self if v in other)

    def __sub__(self, other: Iterable[int]) -> Region:
        other = set(other)
        return Region(v for v in self if v not in other)

    def issubset(self, other: Iterable[int]) -> bool:
        return set(self) <= set(other)

    def __repr__(self) -> str:
        return f"Region({list(self)})"


def distance(g: Graph, i: int, j: int) -> int:
    """Shortest-path length between ``i`` and ``j`` or ``UNREACHABLE``."""
    return int(g.distance_matrix[g.check_vertex(i), g.check_vertex(j)])


def radius(g: Graph, region: Iterable[int]) -> int:
    """Minimum over all vertices of the maximum distance to the region.

    The center may be any vertex of the graph, not only a member of the region.
    """
    lam = Region(region).validate(g)
    if not lam:
        raise ValueError("radius of an empty region is undefined")
    sub = g.distance_matrix[:, list(lam)]
    reachable = np.all(sub != UNREACHABLE, axis=1)
    if not reachable.any():
        raise ValueError(f"region {list(lam)} spans disconnected components")
    return int(sub[reachable].max(axis=1).min())


def ball(g: Graph, j: int, r: int) -> Region:
    if r < 0:
        raise ValueError(f"ball radius must be non-negative, got {r}")
    row = g.distance_matrix[g.check_vertex(j)]
    return Region(np.flatnonzero((row != UNREACHABLE) & (row <= r)).tolist())


def diameter(g: Graph) -> int:
    d = g.distance_matrix
    return int(d[d != UNREACHABLE].max())


# Named lattices ------------------------------------------------------------


def path(length: int) -> Graph:
    return Graph(length, [(i, i + 1) for i in range(length - 1)])


def cycle(length: int) -> Graph:
    if length < 3:
        raise ValueError("a cycle needs at least 3 vertices")
    return Graph(length, [(i, (i + 1) % length) for i in range(length)])


def grid(lx: int, ly: int, boundary: str = "open") -> Graph:
    """Rectangular ``lx`` x ``ly`` grid, vertex ``x + lx*y``.

    ``boundary`` is ``"open"`` or ``"periodic"``. Periodic wrap-around edges
    are only added along directions of length >= 3 to keep the graph simple.
    """
    if boundary not in ("open", "periodic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    edges = []
    for y in range(ly):
        for x in range(lx):
            v = x + lx * y
            if x + 1 < lx:
                edges.append((v, v + 1))
            elif boundary == "periodic" and lx >= 3:
                edges.append((v, lx * y))
            if y + 1 < ly:
                edges.append((v, v + lx))
            elif boundary == "periodic" and ly >= 3:
                edges.append((v, x))
    g = Graph(lx * ly, edges)
    object.__setattr__(g, "_grid_shape", (lx, ly))
    return g


def grid_shape(g: Graph) -> tuple[int, int] | None:
    """``(lx, ly)`` if ``g`` was built by :func:`grid`, else ``None``."""
    return getattr(g, "_grid_shape", None)
