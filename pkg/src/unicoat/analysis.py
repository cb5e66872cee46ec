"""Verdicts on configurations and the matching-dilation lower bound on optimal rounds."""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .core import Configuration, State
from .grid import Node, bfs_layers, distance, distance_to_set


class Infeasible(ValueError):
    pass


UNDEFINED = math.inf


@dataclass
class LayerStats:
    B: list[int]  # B_1 .. B_{N+1}
    N: int
    n_i: list[int]  # n_1 .. n_N

    @classmethod
    def of(cls, obj: Iterable, n: int) -> "LayerStats":
        if n < 1:
            raise ValueError("need at least one particle")
        layers = _layers_until(obj, n)
        sizes = [len(s) for s in layers]
        N = len(sizes)
        B = sizes + [len(_extra_layer(obj, N + 1))]
        n_i = [n - sum(sizes[:i]) for i in range(N)]
        return cls(B, N, n_i)


def _layers_until(obj, n: int) -> list[set[Node]]:
    """Layers 1..N, where N is the first index with B_1 + ... + B_N >= n."""
    obj = list(obj)
    depth = 1
    while True:
        layers = bfs_layers(obj, depth)[1:]
        total = 0
        for i, s in enumerate(layers):
            total += len(s)
            if total >= n:
                return layers[: i + 1]
        depth *= 2


def _extra_layer(obj, i: int) -> set[Node]:
    return bfs_layers(list(obj), i)[i]


# -- legality ---------------------------------------------------------------------


def is_legal(cfg: Configuration) -> bool:
    """All particles contracted and no free node lies closer to the object than
    the farthest occupied node."""
    if any(p.expanded for p in cfg):
        return False
    if not cfg.particles:
        return True
    occ = set(cfg.occ)
    far = max(distance_to_set(v, cfg.object) for v in occ)
    layers = bfs_layers(cfg.object, far)
    return all(layers[i] <= occ for i in range(1, far))


def is_legal_by_formula(cfg: Configuration, extra: int = 1) -> bool:
    """Direct min/max evaluation over layers 1..N+extra; slow reference."""
    if any(p.expanded for p in cfg):
        return False
    occ = set(cfg.occ)
    if not occ:
        return True
    N = LayerStats.of(cfg.object, len(occ)).N
    far_needed = max(min(distance(v, o) for o in cfg.object) for v in occ)
    window = bfs_layers(cfg.object, max(N, far_needed) + extra)
    free = [v for s in window[1:] for v in s if v not in occ]
    occupied_max = max(min(distance(v, o) for o in cfg.object) for v in occ)
    free_min = min(min(distance(v, o) for o in cfg.object) for v in free)
    return free_min >= occupied_max


def layer_complete(cfg: Configuration, i: int, final_layer: int | None = None,
                   quiescent: bool = False) -> bool:
    """Layer i is filled by contracted retired particles.

    For the final layer N only quiescence of a contracted, legal system counts,
    since that layer need not be full.
    """
    if i < 1:
        raise ValueError("layer index must be >= 1")
    N = final_layer if final_layer is not None else LayerStats.of(cfg.object, len(cfg)).N
    if i > N:
        raise ValueError(f"layer {i} beyond the final layer {N}")
    if i == N:
        return quiescent and is_legal(cfg)
    for v in bfs_layers(cfg.object, i)[i]:
        q = cfg.occ.get(v)
        if q is None or q.expanded or q.state is not State.RETIRED:
            return False
    return True


# -- matching dilation ----------------------------------------------------------------


@dataclass
class MatchingDilationResult:
    value: int
    witness: dict[int, Node]  # particle index -> assigned node
    required: frozenset[Node]
    optional: frozenset[Node]


def slots(obj: Iterable, n: int) -> tuple[list[Node], list[Node]]:
    """(required, optional): layers 1..N-1 must all be filled; layer N is optional."""
    layers = _layers_until(obj, n)
    required = sorted(v for s in layers[:-1] for v in s)
    optional = sorted(layers[-1])
    return required, optional


def _hopcroft_karp(adj: list[list[int]], n_right: int) -> tuple[int, list[int]]:
    n_left = len(adj)
    match_l = [-1] * n_left
    match_r = [-1] * n_right
    inf = n_left + n_right + 1
    dist = [0] * n_left

    def bfs() -> bool:
        q = deque()
        found = False
        for u in range(n_left):
            if match_l[u] < 0:
                dist[u] = 0
                q.append(u)
            else:
                dist[u] = inf
        while q:
            u = q.popleft()
            for w in adj[u]:
                m = match_r[w]
                if m < 0:
                    found = True
                elif dist[m] == inf:
                    dist[m] = dist[u] + 1
                    q.append(m)
        return found

    def dfs(u: int) -> bool:
        # Iterative augmentation along the BFS layering.
        stack = [(u, iter(adj[u]))]
        path = []
        while stack:
            x, it = stack[-1]
            advanced = False
            for w in it:
                m = match_r[w]
                if m < 0:
                    path.append((x, w))
                    for a, b in path:
                        match_l[a] = b
                        match_r[b] = a
                    return True
                if dist[m] == dist[x] + 1:
                    path.append((x, w))
                    stack.append((m, iter(adj[m])))
                    advanced = True
                    break
            if not advanced:
                dist[x] = inf
                stack.pop()
                if path:
                    path.pop()
        return False

    size = 0
    while bfs():
        for u in range(n_left):
            if match_l[u] < 0 and dfs(u):
                size += 1
    return size, match_l


def _feasible(parts: Sequence[Node], required: Sequence[Node], optional: Sequence[Node],
              c: int) -> dict[int, Node] | None:
    """A matching within distance c saturating particles and required slots, or None.

    Padding the particle side with dummies that may only take optional slots
    turns this into a perfect matching on the slot side.
    """
    slot_list = list(required) + list(optional)
    n_req = len(required)
    dummies = len(slot_list) - len(parts)
    if dummies < 0:
        raise Infeasible("more particles than slots")
    adj = []
    for v in parts:
        adj.append([j for j, s in enumerate(slot_list) if distance(v, s) <= c])
    opt_idx = list(range(n_req, len(slot_list)))
    adj.extend([opt_idx] * dummies)
    size, match_l = _hopcroft_karp(adj, len(slot_list))
    if size < len(slot_list):
        return None
    return {i: slot_list[match_l[i]] for i in range(len(parts))}


def md_bottleneck_feasible(inst, c: int) -> bool:
    if c < 0:
        return False
    required, optional = slots(inst.object, inst.n)
    return _feasible(inst.particles, required, optional, c) is not None


def matching_dilation(inst) -> MatchingDilationResult:
    if inst.n < 1:
        raise ValueError("need at least one particle")
    required, optional = slots(inst.object, inst.n)
    if inst.n > len(required) + len(optional):
        raise Infeasible("too many particles for layers 1..N")
    all_slots = required + optional
    costs = sorted({distance(v, s) for v in inst.particles for s in all_slots})
    lo, hi = 0, len(costs) - 1
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        w = _feasible(inst.particles, required, optional, costs[mid])
        if w is not None:
            best = (costs[mid], w)
            hi = mid - 1
        else:
            lo = mid + 1
    if best is None:
        raise Infeasible("no perfect assignment at any threshold")
    value, witness = best
    return MatchingDilationResult(value, witness, frozenset(required), frozenset(optional))


def competitive_ratio_estimate(rounds, md: MatchingDilationResult | int) -> Fraction | float:
    """rounds / MD; ``UNDEFINED`` (infinity) when MD is zero.

    ``rounds`` is a round count or a finished trace.
    """
    if not isinstance(rounds, int):
        rounds = rounds.rounds_to_quiescence
    value = md if isinstance(md, int) else md.value
    if value == 0:
        return UNDEFINED
    return Fraction(rounds, value)


def ratio_anomaly(ratio) -> bool:
    """A ratio below one means rounds < MD, which a correct run cannot produce."""
    return ratio != UNDEFINED and ratio < 1
