"""Particles, configurations, and the movement primitives of the amoebot model."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .grid import DIRECTIONS, Node, direction_between, is_connected


class State(enum.Enum):
    IDLE = "idle"
    FOLLOWER = "follower"
    ROOT = "root"
    RETIRED = "retired"


ACTIVE = (State.FOLLOWER, State.ROOT)

_ALLOWED = {
    State.IDLE: {State.ROOT, State.FOLLOWER},
    State.FOLLOWER: {State.ROOT},
    State.ROOT: {State.RETIRED},
    State.RETIRED: set(),
}


class MovementError(Exception):
    """A movement primitive was called on a configuration that forbids it."""


class TargetOccupied(MovementError):
    pass


class AlreadyExpanded(MovementError):
    pass


class AlreadyContracted(MovementError):
    pass


class IllegalHandover(MovementError):
    pass


class IllegalTransition(Exception):
    pass


@dataclass(slots=True)
class Particle:
    id: int
    head: Node
    tail: Node
    chirality_offset: int = 0
    state: State = State.IDLE
    parent_port: int | None = None
    dir_port: int | None = None
    down_port: int | None = None
    cw_port: int | None = None
    ccw_port: int | None = None
    marker_port: int | None = None
    layer_mod4: int = 0
    complaint_flags: int = 0
    is_leader: bool = False
    is_marker: bool = False
    # Set once a root has performed its first handover expansion; from then on
    # the root contributes a head -> dir edge to the forest graph.
    adopted: bool = False

    @property
    def contracted(self) -> bool:
        return self.head == self.tail

    @property
    def expanded(self) -> bool:
        return self.head != self.tail

    @property
    def active(self) -> bool:
        return self.state is State.FOLLOWER or self.state is State.ROOT

    def nodes(self) -> tuple[Node, ...]:
        return (self.head,) if self.head == self.tail else (self.head, self.tail)

    def to_global(self, label: int) -> int:
        return (label + self.chirality_offset) % 6

    def to_local(self, gdir: int) -> int:
        return (gdir - self.chirality_offset) % 6

    def port_node(self, label: int, origin: Node | None = None) -> Node:
        """Node reached through local port ``label`` of ``origin`` (head by default)."""
        v = self.head if origin is None else origin
        dq, dr = DIRECTIONS[(label + self.chirality_offset) % 6]
        return Node(v[0] + dq, v[1] + dr)

    def label_to(self, node, origin: Node | None = None) -> int | None:
        v = self.head if origin is None else origin
        g = direction_between(v, node)
        return None if g is None else (g - self.chirality_offset) % 6

    def set_state(self, new: State) -> None:
        if new is self.state:
            return
        if new not in _ALLOWED[self.state]:
            raise IllegalTransition(f"{self.state.value} -> {new.value}")
        self.state = new

    def memory(self) -> tuple:
        """Everything a neighbor could observe, for change detection."""
        return (
            self.head, self.tail, self.state, self.parent_port, self.dir_port,
            self.down_port, self.cw_port, self.ccw_port, self.marker_port,
            self.layer_mod4, self.complaint_flags, self.is_leader,
            self.is_marker, self.adopted,
        )


class MoveKind(enum.Enum):
    SOLE_CONTRACTION = "sole_contraction"
    SOLE_EXPANSION = "sole_expansion"
    HANDOVER_CONTRACTION = "handover_contraction"
    HANDOVER_EXPANSION = "handover_expansion"


@dataclass(frozen=True, slots=True)
class Movement:
    kind: MoveKind
    actor: int
    node_from: Node
    node_to: Node
    partner: int | None = None

    def to_json(self) -> dict:
        d = {"kind": self.kind.value, "actor": self.actor,
             "from": list(self.node_from), "to": list(self.node_to)}
        if self.partner is not None:
            d["partner"] = self.partner
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Movement":
        return cls(MoveKind(d["kind"]), d["actor"], Node(*d["from"]),
                   Node(*d["to"]), d.get("partner"))


class Configuration:
    """Object node set, particles, and the node -> particle occupancy index.

    Mutated in place by the movement primitives; each primitive returns the
    list of Movement records it produced.
    """

    def __init__(self, obj: Iterable, particles: Iterable[Particle] = ()):
        self.object: frozenset[Node] = frozenset(Node(*v) for v in obj)
        self.particles: dict[int, Particle] = {}
        self.occ: dict[Node, Particle] = {}
        for p in particles:
            self.add(p)

    def add(self, p: Particle) -> None:
        if p.id in self.particles:
            raise ValueError(f"duplicate particle id {p.id}")
        for v in p.nodes():
            if v in self.object:
                raise TargetOccupied(f"particle on object node {v}")
            if v in self.occ:
                raise TargetOccupied(f"node {v} already occupied")
        self.particles[p.id] = p
        for v in p.nodes():
            self.occ[v] = p

    def __iter__(self) -> Iterator[Particle]:
        return iter(self.particles.values())

    def __len__(self) -> int:
        return len(self.particles)

    def at(self, v) -> Particle | None:
        return self.occ.get(v)

    def free(self, v) -> bool:
        return v not in self.occ and v not in self.object

    def copy(self) -> "Configuration":
        clone = Configuration(self.object)
        for p in self.particles.values():
            q = Particle(**{f: getattr(p, f) for f in Particle.__slots__})
            clone.particles[q.id] = q
            for v in q.nodes():
                clone.occ[v] = q
        return clone

    # -- movement primitives -------------------------------------------------

    def expand(self, pid: int, label: int) -> list[Movement]:
        p = self.particles[pid]
        if p.expanded:
            raise AlreadyExpanded(f"particle {pid} is expanded")
        target = p.port_node(label)
        if not self.free(target):
            raise TargetOccupied(f"node {target} is not free")
        p.head = target
        self.occ[target] = p
        return [Movement(MoveKind.SOLE_EXPANSION, pid, p.tail, target)]

    def contract(self, pid: int) -> list[Movement]:
        p = self.particles[pid]
        if p.contracted:
            raise AlreadyContracted(f"particle {pid} is contracted")
        old_tail = p.tail
        del self.occ[old_tail]
        p.tail = p.head
        return [Movement(MoveKind.SOLE_CONTRACTION, pid, old_tail, p.head)]

    def handover(self, initiator: int, partner: int) -> list[Movement]:
        a = self.particles[initiator]
        b = self.particles[partner]
        if a.expanded == b.expanded:
            raise IllegalHandover("exactly one party must be expanded")
        exp, con = (a, b) if a.expanded else (b, a)
        if direction_between(con.head, exp.tail) is None:
            raise IllegalHandover("contracted party not adjacent to the expanded tail")
        vacated = exp.tail
        # A child aimed at the vacated tail keeps the same parent after the swap.
        child_follows = (
            con.parent_port is not None and con.port_node(con.parent_port) == vacated
        )
        root_follows = (
            con.state is State.ROOT and con.dir_port is not None
            and con.port_node(con.dir_port) == vacated
        )
        exp.tail = exp.head
        start = con.head
        con.head = vacated
        con.tail = start
        self.occ[vacated] = con
        if child_follows:
            con.parent_port = con.label_to(exp.head)
        if root_follows:
            con.dir_port = con.label_to(exp.head)
            con.adopted = True
        return [
            Movement(MoveKind.HANDOVER_EXPANSION, con.id, start, vacated, exp.id),
            Movement(MoveKind.HANDOVER_CONTRACTION, exp.id, vacated, exp.head, con.id),
        ]

    # -- whole-configuration queries ------------------------------------------

    def occupied(self) -> set[Node]:
        return set(self.occ)

    def connected(self) -> bool:
        return is_connected(set(self.occ) | set(self.object))

    def positions(self) -> dict[int, tuple[Node, Node]]:
        return {pid: (p.head, p.tail) for pid, p in self.particles.items()}

    def check_occupancy(self) -> None:
        seen: dict[Node, int] = {}
        for p in self.particles.values():
            if p.expanded and direction_between(p.head, p.tail) is None:
                raise AssertionError(f"particle {p.id} head/tail not adjacent")
            for v in p.nodes():
                if v in self.object:
                    raise AssertionError(f"particle {p.id} on object node {v}")
                if v in seen:
                    raise AssertionError(f"node {v} claimed by {seen[v]} and {p.id}")
                seen[v] = p.id
        if set(seen) != set(self.occ) or any(self.occ[v].id != i for v, i in seen.items()):
            raise AssertionError("occupancy index out of sync")


@dataclass
class ForestGraph:
    vertices: set[Node] = field(default_factory=set)
    edges: dict[Node, Node] = field(default_factory=dict)

    def out_degree(self, v: Node) -> int:
        return 1 if v in self.edges else 0

    def cycles(self) -> list[list[Node]]:
        """All directed cycles; out-degree <= 1 makes this a functional-graph walk."""
        color: dict[Node, int] = {}
        found = []
        for start in self.vertices:
            if start in color:
                continue
            path = []
            v = start
            while v is not None and v not in color:
                color[v] = 1
                path.append(v)
                v = self.edges.get(v)
            if v is not None and color.get(v) == 1:
                found.append(path[path.index(v):])
            for u in path:
                color[u] = 2
        return found


def build_forest_graph(cfg: Configuration) -> ForestGraph:
    fg = ForestGraph()
    for p in cfg:
        if p.active:
            fg.vertices.update(p.nodes())
    for p in cfg:
        if not p.active:
            continue
        if p.expanded:
            fg.edges[p.tail] = p.head
        target = None
        if p.state is State.FOLLOWER and p.parent_port is not None:
            target = p.port_node(p.parent_port)
        elif p.state is State.ROOT and p.adopted and p.dir_port is not None:
            target = p.port_node(p.dir_port)
        if target is not None and target in fg.vertices:
            fg.edges[p.head] = target
    return fg


def super_roots(fg: ForestGraph, cfg: Configuration) -> list[int]:
    out = []
    for p in cfg:
        if p.state is not State.ROOT:
            continue
        if p.dir_port is None or cfg.at(p.port_node(p.dir_port)) is None:
            out.append(p.id)
    return sorted(out)
