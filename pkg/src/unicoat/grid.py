"""Geometry of the infinite triangular grid in axial coordinates.

Directions are indexed 0..5 in clockwise order; index 0 is a fixed global
"east". Nothing here materializes the infinite grid: every node-set query
works by bounded BFS outward from a finite seed set.
"""
from __future__ import annotations

from collections import deque
from typing import Iterable, NamedTuple


class Node(NamedTuple):
    q: int
    r: int


# Consecutive entries differ by a single unit step, so the table is a cyclic
# ordering of the six neighbors; we call increasing index "clockwise".
DIRECTIONS: tuple[tuple[int, int], ...] = (
    (1, 0),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (0, -1),
    (1, -1),
)

_DIR_INDEX = {d: i for i, d in enumerate(DIRECTIONS)}


class Direction(int):
    """Global direction label in [0, 5]."""

    def __new__(cls, index: int) -> "Direction":
        return super().__new__(cls, index % 6)

    def opposite(self) -> "Direction":
        return Direction(self + 3)

    def cw(self, steps: int = 1) -> "Direction":
        return Direction(self + steps)

    def ccw(self, steps: int = 1) -> "Direction":
        return Direction(self - steps)

    @property
    def vector(self) -> tuple[int, int]:
        return DIRECTIONS[self]


def neighbor(v, d: int) -> Node:
    dq, dr = DIRECTIONS[d % 6]
    return Node(v[0] + dq, v[1] + dr)


def neighbors(v) -> list[Node]:
    q, r = v
    return [Node(q + dq, r + dr) for dq, dr in DIRECTIONS]


def direction_between(v, w) -> int | None:
    """Global direction from v to an adjacent w, or None if not adjacent."""
    return _DIR_INDEX.get((w[0] - v[0], w[1] - v[1]))


def adjacent(v, w) -> bool:
    return (w[0] - v[0], w[1] - v[1]) in _DIR_INDEX


def distance(v, w) -> int:
    dq = w[0] - v[0]
    dr = w[1] - v[1]
    return (abs(dq) + abs(dr) + abs(dq + dr)) // 2


def distance_to_set(v, nodes: Iterable) -> int:
    best = None
    for w in nodes:
        d = distance(v, w)
        if best is None or d < best:
            best = d
            if d == 0:
                break
    if best is None:
        raise ValueError("distance_to_set: empty node set")
    return best


def layer_of(v, obj: Iterable) -> int:
    return distance_to_set(v, obj)


def bfs_layers(seed: Iterable, depth: int) -> list[set[Node]]:
    """Layers 0..depth of the multi-source BFS from ``seed``."""
    frontier = {Node(*v) for v in seed}
    if not frontier:
        raise ValueError("bfs_layers: empty seed")
    seen = set(frontier)
    out = [frontier]
    for _ in range(depth):
        nxt = set()
        for v in frontier:
            for w in neighbors(v):
                if w not in seen:
                    seen.add(w)
                    nxt.add(w)
        out.append(nxt)
        frontier = nxt
    return out


def layer_nodes(i: int, obj: Iterable) -> set[Node]:
    if i < 1:
        raise ValueError("layer index must be >= 1")
    return bfs_layers(obj, i)[i]


def bfs_distance(v, w, limit: int = 64) -> int:
    """Shortest-path length by plain BFS; the oracle for ``distance``."""
    v, w = Node(*v), Node(*w)
    if v == w:
        return 0
    seen = {v}
    queue = deque([(v, 0)])
    while queue:
        u, d = queue.popleft()
        if d >= limit:
            break
        for x in neighbors(u):
            if x == w:
                return d + 1
            if x not in seen:
                seen.add(x)
                queue.append((x, d + 1))
    raise ValueError(f"no path within {limit} steps")


def hexagon(radius: int, center=(0, 0)) -> set[Node]:
    """All nodes within ``radius`` of ``center``."""
    cq, cr = center
    out = set()
    for dq in range(-radius, radius + 1):
        for dr in range(max(-radius, -dq - radius), min(radius, -dq + radius) + 1):
            out.add(Node(cq + dq, cr + dr))
    return out


def is_connected(nodes: Iterable) -> bool:
    nodes = set(nodes)
    if not nodes:
        return True
    start = next(iter(nodes))
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for x in neighbors(u):
            if x in nodes and x not in seen:
                seen.add(x)
                stack.append(x)
    return len(seen) == len(nodes)


def components(nodes: Iterable) -> list[set[Node]]:
    remaining = set(nodes)
    out = []
    while remaining:
        start = remaining.pop()
        comp = {start}
        stack = [start]
        while stack:
            u = stack.pop()
            for x in neighbors(u):
                if x in remaining:
                    remaining.discard(x)
                    comp.add(x)
                    stack.append(x)
        out.append(comp)
    return out
