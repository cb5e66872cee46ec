"""Reference computations written independently of the package code paths."""
import random
from collections import deque
from itertools import permutations

UNIT = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)]


def nbrs(v):
    return [(v[0] + a, v[1] + b) for a, b in UNIT]


def bfs_dist(src, dst, cap=200):
    src, dst = tuple(src), tuple(dst)
    seen = {src}
    q = deque([(src, 0)])
    while q:
        u, d = q.popleft()
        if u == dst:
            return d
        if d >= cap:
            continue
        for w in nbrs(u):
            if w not in seen:
                seen.add(w)
                q.append((w, d + 1))
    raise ValueError("unreachable")


def ring_sizes(obj, depth):
    """Sizes of BFS rings 1..depth around obj, by explicit flood fill."""
    dist = {tuple(v): 0 for v in obj}
    q = deque(dist)
    while q:
        u = q.popleft()
        if dist[u] == depth:
            continue
        for w in nbrs(u):
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    return [sum(1 for d in dist.values() if d == i) for i in range(1, depth + 1)]


def flood_connected(nodes):
    nodes = {tuple(v) for v in nodes}
    if not nodes:
        return True
    start = next(iter(nodes))
    seen = {start}
    stack = [start]
    while stack:
        for w in nbrs(stack.pop()):
            if w in nodes and w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == nodes


def obj_dist(v, obj):
    return min(bfs_dist(v, o) for o in obj)


def layered_slots(obj, n):
    """(required, optional) by flood fill: rings until their total reaches n."""
    depth = 1
    while sum(ring_sizes(obj, depth)) < n:
        depth += 1
    dist = {tuple(v): 0 for v in obj}
    q = deque(dist)
    while q:
        u = q.popleft()
        if dist[u] == depth:
            continue
        for w in nbrs(u):
            if w not in dist:
                dist[w] = dist[u] + 1
                q.append(w)
    required = sorted(v for v, d in dist.items() if 1 <= d < depth)
    optional = sorted(v for v, d in dist.items() if d == depth)
    return required, optional


def md_exhaustive(obj, parts):
    """Min over injective assignments covering every required slot of the max
    particle-to-slot grid distance; branch and bound over particles."""
    required, optional = layered_slots(obj, len(parts))
    slots = required + optional
    need = set(range(len(required)))
    d = [[bfs_dist(p, s) for s in slots] for p in parts]
    best = [float("inf")]

    def go(i, used, worst):
        if worst >= best[0]:
            return
        if len(parts) - i < len(need - used):
            return
        if i == len(parts):
            if need <= used:
                best[0] = worst
            return
        for j in sorted(range(len(slots)), key=lambda j: d[i][j]):
            if j not in used:
                go(i + 1, used | {j}, max(worst, d[i][j]))

    go(0, frozenset(), 0)
    return best[0]


def md_permutations(obj, parts):
    """Plain enumeration of every injective map; only for tiny cases."""
    required, optional = layered_slots(obj, len(parts))
    slots = required + optional
    req = set(required)
    best = float("inf")
    for perm in permutations(slots, len(parts)):
        if not req <= set(perm):
            continue
        best = min(best, max(bfs_dist(p, s) for p, s in zip(parts, perm)))
    return best


def accrete(rng, seeds, count, blocked=()):
    taken = set(seeds) | set(blocked)
    frontier = sorted({w for v in taken for w in nbrs(v) if w not in taken})
    out = []
    for _ in range(count):
        v = rng.choice(frontier)
        out.append(v)
        taken.add(v)
        frontier = sorted({w for u in taken for w in nbrs(u) if w not in taken})
    return out


def random_instance(seed, max_obj=4, max_n=8):
    rng = random.Random(seed)
    obj = [(0, 0)] + accrete(rng, [(0, 0)], rng.randint(0, max_obj - 1))
    parts = accrete(rng, obj, rng.randint(1, max_n))
    from unicoat.harness.instances import Instance
    return Instance(obj, parts, seed)
