"""Instances (object + idle particles), their generators, validation and JSON form."""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from ..grid import (Node, bfs_layers, components, distance, hexagon, is_connected,
                    layer_nodes, neighbors)


class BadParity(ValueError):
    """The symmetric gap construction does not close for this particle count."""


@dataclass
class Instance:
    object: list[Node]
    particles: list[Node]
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.object = sorted(Node(*v) for v in self.object)
        self.particles = [Node(*v) for v in self.particles]

    @property
    def n(self) -> int:
        return len(self.particles)

    def to_json(self) -> dict:
        return {
            "object": [list(v) for v in self.object],
            "particles": [list(v) for v in self.particles],
            "seed": self.seed,
            "meta": self.meta,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Instance":
        return cls(d["object"], d["particles"], int(d.get("seed", 0)), dict(d.get("meta", {})))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True) + "\n"


def save_instance(inst: Instance, path) -> None:
    Path(path).write_text(inst.dumps(), encoding="utf-8")


def load_instance(path) -> Instance:
    return Instance.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# -- generators ----------------------------------------------------------------


def gen_hexagon(radius: int, n: int, seed: int) -> Instance:
    """Hexagonal object; particles grown by seeded random connected accretion.

    Each new particle lands on a uniformly chosen free node adjacent to the
    current object-plus-particle cluster, so growth starts at perimeter
    contacts and clumps outward from there.
    """
    if n < 1:
        raise ValueError("need at least one particle")
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    rng = random.Random(seed)
    obj = hexagon(radius)
    taken = set(obj)
    frontier = set()
    for v in obj:
        frontier.update(w for w in neighbors(v) if w not in taken)
    placed: list[Node] = []
    for _ in range(n):
        v = rng.choice(sorted(frontier))
        placed.append(v)
        taken.add(v)
        frontier.discard(v)
        frontier.update(w for w in neighbors(v) if w not in taken)
    return Instance(sorted(obj), placed, seed,
                    {"generator": "hexagon-accretion", "radius": radius, "n": n})


def gen_line_lemma1(n: int, seed: int = 0) -> Instance:
    """Straight-line object with a perpendicular chain of n particles at one end."""
    if n < 1:
        raise ValueError("need at least one particle")
    length = n + 2
    obj = [Node(x, 0) for x in range(length)]
    chain = [Node(0, k) for k in range(1, n + 1)]
    return Instance(obj, chain, seed, {"generator": "line-lemma1", "n": n, "length": length})


def gap_length(n: int) -> int:
    """Object length for the gap instance with n particles (n == B_1 == 2L + 4)."""
    if n < 8 or (n - 4) % 2 or ((n - 4) // 2) % 2:
        raise BadParity(f"no symmetric gap instance with n={n}; need n = 2L+4 with L even, L >= 2")
    return (n - 4) // 2


def gen_gap_theorem1(n: int, seed: int = 0) -> Instance:
    """Line object; layer 1 full but for one hole centered below, plus one
    particle in layer 2 above the middle.

    Exact mirror symmetry of both the hole and the extra particle is impossible
    on the triangular lattice; the hole is exactly centered and the top particle
    sits half a node right of center.
    """
    length = gap_length(n)
    obj = [Node(x, 0) for x in range(length)]
    ring = layer_nodes(1, obj)
    hole = Node(length // 2 - 1, 1)
    assert hole in ring
    top = Node(length // 2 + 1, -2)
    assert distance_to(top, obj) == 2
    parts = sorted(ring - {hole}, key=lambda v: (v[1], v[0]))
    parts.append(top)
    return Instance(obj, parts, seed,
                    {"generator": "gap-theorem1", "n": n, "length": length,
                     "hole": list(hole), "extra": list(top)})


def distance_to(v, nodes) -> int:
    return min(distance(v, w) for w in nodes)


# -- validation ---------------------------------------------------------------


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)
    unchecked: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _hull(obj: set[Node], margin: int) -> set[Node]:
    qs = [v[0] for v in obj]
    rs = [v[1] for v in obj]
    center = ((min(qs) + max(qs)) // 2, (min(rs) + max(rs)) // 2)
    radius = max(distance(center, v) for v in obj) + margin
    return hexagon(radius, center)


def validate_instance(inst: Instance, strict: bool = False) -> ValidationReport:
    rep = ValidationReport()
    obj = set(inst.object)
    parts = list(inst.particles)
    if not obj:
        rep.violations.append("property 2: empty object")
        return rep
    if len(set(parts)) != len(parts):
        rep.violations.append("property 1: two particles share a node")
    if obj & set(parts):
        rep.violations.append("property 1: particle placed on an object node")
    if not is_connected(obj):
        rep.violations.append("property 2: object is not connected")
    if not is_connected(obj | set(parts)):
        rep.violations.append("property 2: particles not connected to the object")
    hull = _hull(obj, 2)
    free = hull - obj
    if len(components(free)) != 1:
        rep.violations.append("property 3: object encloses a hole")
    if strict:
        width = tunnel_width_needed(inst)
        narrow = narrow_gaps(obj, width)
        if narrow:
            a, b = narrow[0]
            rep.violations.append(
                f"property 4: tunnel narrower than {width} between {tuple(a)} and {tuple(b)}")
    else:
        rep.unchecked.append("property 4")
    return rep


def tunnel_width_needed(inst: Instance) -> int:
    b1 = len(layer_nodes(1, inst.object))
    return 2 * (math.ceil(inst.n / b1) + 1)


def narrow_gaps(obj: set[Node], width: int) -> list[tuple[Node, Node]]:
    """Pairs of object nodes separated by fewer than ``width`` free nodes while
    lying on different arms of the object (far apart when walking inside it).

    The search is bounded to pairs within grid distance ``width``.
    """
    boundary = [v for v in obj if any(w not in obj for w in neighbors(v))]
    bset = set(boundary)
    out = []
    for a in sorted(boundary):
        inside = _object_distances(obj, a, limit=3 * width + 2)
        for b in sorted(bset):
            if b <= a:
                continue
            d = distance(a, b)
            if d < 2 or d > width:
                continue
            walk = inside.get(b)
            if walk is not None and walk <= 2 * d + 2:
                continue
            if _free_straight(obj, a, b):
                out.append((a, b))
    return out


def _object_distances(obj: set[Node], src: Node, limit: int) -> dict[Node, int]:
    dist = {src: 0}
    frontier = [src]
    for k in range(1, limit + 1):
        nxt = []
        for v in frontier:
            for w in neighbors(v):
                if w in obj and w not in dist:
                    dist[w] = k
                    nxt.append(w)
        frontier = nxt
    return dist


def _free_straight(obj: set[Node], a: Node, b: Node) -> bool:
    """Some shortest grid path from a to b has all interior nodes free."""
    d = distance(a, b)
    frontier = {a}
    for step in range(1, d):
        nxt = set()
        for v in frontier:
            for w in neighbors(v):
                if w not in obj and distance(w, b) == d - step:
                    nxt.add(w)
        frontier = nxt
        if not frontier:
            return False
    return True


def layer_counts(obj, upto: int) -> list[int]:
    """[B_1, ..., B_upto]."""
    return [len(s) for s in bfs_layers(obj, upto)[1:]]
