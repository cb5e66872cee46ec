"""Per-activation behavior of the Universal Coating algorithm.

Everything in this module reasons in particle-local port labels. Coordinates
and particle ids only appear inside ``ActivationContext`` helpers, which play
the role of the physical bonds; the branch logic never reads them (see
``tests/test_coating.py::test_algorithm_reads_no_ids``).
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Protocol

from .core import Configuration, Movement, Particle, State
from .grid import Node, layer_nodes


class AllPortsIncident(Exception):
    """Every port of the particle faces the surface; the instance is degenerate."""


OBJECT = "object"


@dataclass
class CoatingSettings:
    election: str = "oracle"
    root_generates_flag: bool = True
    flag_capacity: int = 2

    def __post_init__(self):
        if self.election not in ("oracle", "randomized"):
            raise ValueError(f"unknown election strategy {self.election!r}")
        if self.flag_capacity not in (1, 2):
            raise ValueError("flag_capacity must be 1 or 2")


@dataclass
class FlagLedger:
    """Complaint-flag accounting; flags get identities so they can be replayed."""

    created: int = 0
    consumed: int = 0
    cleared: int = 0
    transfers: int = 0
    holders: dict[int, list[int]] = field(default_factory=dict)
    events: list[tuple] = field(default_factory=list)

    def balance(self) -> int:
        return self.created - self.consumed - self.cleared

    def held(self) -> int:
        return sum(len(v) for v in self.holders.values())

    def create(self, pid: int) -> None:
        fid = self.created
        self.created += 1
        self.holders.setdefault(pid, []).append(fid)
        self.events.append(("create", fid, pid))

    def move(self, src: int, dst: int) -> None:
        fid = self.holders[src].pop(0)
        self.holders.setdefault(dst, []).append(fid)
        self.transfers += 1
        self.events.append(("move", fid, src, dst))

    def consume(self, pid: int) -> None:
        fid = self.holders[pid].pop(0)
        self.consumed += 1
        self.events.append(("consume", fid, pid))

    def clear(self, pid: int) -> None:
        for fid in self.holders.pop(pid, []):
            self.cleared += 1
            self.events.append(("clear", fid, pid))


class ActivationContext:
    """One particle's activation: its own memory plus port-indexed neighbor access."""

    __slots__ = ("cfg", "p", "settings", "strategy", "flags", "moves", "dirty")

    def __init__(self, cfg: Configuration, p: Particle, settings: CoatingSettings,
                 strategy: "LeaderElectionStrategy", flags: FlagLedger):
        self.cfg = cfg
        self.p = p
        self.settings = settings
        self.strategy = strategy
        self.flags = flags
        self.moves: list[Movement] = []
        self.dirty = False

    @property
    def capacity(self) -> int:
        return self.settings.flag_capacity

    def look(self, label: int, origin: Node | None = None):
        v = self.p.port_node(label, origin)
        if v in self.cfg.object:
            return OBJECT
        return self.cfg.occ.get(v)

    def node(self, label: int) -> Node:
        return self.p.port_node(label)

    def ports(self):
        """(label, occupant) for the six ports around the head."""
        return [(label, self.look(label)) for label in range(6)]

    def tail_ports(self):
        return [(label, self.look(label, self.p.tail)) for label in range(6)]

    def points_at_my_tail(self, q: Particle) -> bool:
        """True iff q's parent pointer (or a root's dir) aims at our tail node."""
        tail = self.p.tail
        if q.state is State.FOLLOWER:
            return q.parent_port is not None and q.port_node(q.parent_port) == tail
        if q.state is State.ROOT:
            return q.dir_port is not None and q.port_node(q.dir_port) == tail
        return False

    def is_tail_of(self, q: Particle, label: int) -> bool:
        return q.expanded and self.p.port_node(label) == q.tail

    def marker_faces_me(self, q: Particle) -> bool:
        return q.marker_port is not None and q.port_node(q.marker_port) == self.p.head

    def peer_port(self, q: Particle, attr: str):
        label = getattr(q, attr)
        if label is None:
            return None
        v = q.port_node(label)
        return OBJECT if v in self.cfg.object else self.cfg.occ.get(v)

    def label_toward(self, q: Particle) -> int | None:
        for label in range(6):
            if self.look(label) is q:
                return label
        return None

    # -- mutations ----------------------------------------------------------

    def expand(self, label: int) -> None:
        self.moves.extend(self.cfg.expand(self.p.id, label))
        self._refresh(self.p)

    def contract(self) -> None:
        self.moves.extend(self.cfg.contract(self.p.id))
        self._refresh(self.p)

    def handover(self, q: Particle) -> None:
        self.moves.extend(self.cfg.handover(self.p.id, q.id))
        self._refresh(self.p)
        self._refresh(q)

    def _refresh(self, q: Particle) -> None:
        # A moving root keeps dir aimed at the next clockwise position.
        if q.state is State.ROOT:
            compute_layer(ActivationContext(self.cfg, q, self.settings, self.strategy, self.flags))

    def give_flag(self, q: Particle) -> None:
        self.p.complaint_flags -= 1
        q.complaint_flags += 1
        self.flags.move(self.p.id, q.id)
        self.dirty = True

    def create_flag(self) -> None:
        self.p.complaint_flags += 1
        self.flags.create(self.p.id)

    def consume_flag(self) -> None:
        self.p.complaint_flags -= 1
        self.flags.consume(self.p.id)

    def clear_flags(self) -> None:
        self.p.complaint_flags = 0
        self.flags.clear(self.p.id)


# -- leader election ---------------------------------------------------------


class LeaderElectionStrategy(Protocol):
    leader_position: Node | None

    def register(self, node: Node) -> None: ...

    def step(self, ctx: ActivationContext) -> None: ...

    def dormant(self) -> bool: ...


def _layer_one_full(cfg: Configuration, ring: set[Node]) -> bool:
    for v in ring:
        q = cfg.occ.get(v)
        if q is None or q.expanded or q.state is not State.ROOT and q.state is not State.RETIRED:
            return False
    return True


class OracleStrategy:
    """Non-local referee: once layer 1 is full of contracted roots it picks the
    lexicographically least layer-1 node."""

    def __init__(self, cfg: Configuration):
        self.ring = layer_nodes(1, cfg.object)
        self.candidates: set[Node] = set()
        self.leader_position: Node | None = None
        self.announced = False

    def register(self, node: Node) -> None:
        self.candidates.add(node)

    def step(self, ctx: ActivationContext) -> None:
        if self.leader_position is None:
            if not _layer_one_full(ctx.cfg, self.ring):
                return
            self.leader_position = min(self.ring)
            ctx.dirty = True
        if not self.announced and ctx.p.head == self.leader_position:
            ctx.p.is_leader = True
            self.announced = True

    def dormant(self) -> bool:
        return self.leader_position is None or self.announced


class RandomizedStrategy:
    """Stand-in for the node-based randomized election.

    A token walks the layer-1 cycle along the roots' clockwise pointers, one
    hop per activation of its holder; a full lap over contracted roots detects
    that layer 1 is complete. Then every position is a candidate and phases of
    fair coin flips run: when all surviving candidates have flipped, the tails
    withdraw unless nobody flipped heads. The last survivor is the leader.
    """

    def __init__(self, cfg: Configuration, seed: int):
        self.ring = layer_nodes(1, cfg.object)
        self.rng = random.Random(seed)
        self.token: Node | None = None
        self.origin: Node | None = None
        self.hops = 0
        self.complete = False
        self.alive: set[Node] = set()
        self.flips: dict[Node, int] = {}
        self.phases = 0
        self.leader_position: Node | None = None
        self.announced = False

    def register(self, node: Node) -> None:
        if self.token is None:
            self.token = self.origin = node

    def _advance_token(self, ctx: ActivationContext) -> None:
        p = ctx.p
        if self.token != p.head or p.dir_port is None:
            return
        nxt = ctx.look(p.dir_port)
        if isinstance(nxt, Particle) and nxt.state is State.ROOT and nxt.contracted \
                and nxt.head in self.ring:
            self.token = nxt.head
            self.hops += 1
            ctx.dirty = True
            if self.token == self.origin and self.hops >= 3:
                if _layer_one_full(ctx.cfg, self.ring):
                    self.complete = True
                    self.alive = set(self.ring)
                else:
                    self.hops = 0
        elif self.origin != p.head or self.hops:
            self.origin = p.head
            self.hops = 0
            ctx.dirty = True

    def step(self, ctx: ActivationContext) -> None:
        if self.leader_position is None:
            if not self.complete:
                self._advance_token(ctx)
                return
            v = ctx.p.head
            if v in self.alive and v not in self.flips:
                self.flips[v] = self.rng.getrandbits(1)
                ctx.dirty = True
                if len(self.flips) == len(self.alive):
                    heads = {u for u, b in self.flips.items() if b}
                    if heads:
                        self.alive = heads
                    self.flips = {}
                    self.phases += 1
                    if len(self.alive) == 1:
                        self.leader_position = next(iter(self.alive))
            if self.leader_position is None:
                return
        if not self.announced and ctx.p.head == self.leader_position:
            ctx.p.is_leader = True
            self.announced = True
            ctx.dirty = True

    def dormant(self) -> bool:
        # Before the lap completes the token only moves when its holder acts;
        # progress there is reported through ActivationContext.dirty.
        return self.announced or not self.complete


def make_strategy(settings: CoatingSettings, cfg: Configuration, seed: int):
    if settings.election == "oracle":
        return OracleStrategy(cfg)
    return RandomizedStrategy(cfg, seed)


def leader_election_step(ctx: ActivationContext, strategy: LeaderElectionStrategy) -> None:
    strategy.step(ctx)


# -- primitives --------------------------------------------------------------


def forward_complaint(ctx: ActivationContext, label: int | None) -> bool:
    """Hand one complaint flag to the particle behind ``label`` if it has room."""
    p = ctx.p
    if label is None or p.complaint_flags < 1 or p.expanded:
        return False
    q = ctx.look(label)
    if not isinstance(q, Particle) or q.complaint_flags >= ctx.capacity:
        return False
    ctx.give_flag(q)
    return True


def _is_lower_surface(ctx: ActivationContext, q, layer: int) -> bool:
    if q is OBJECT:
        return True
    return (isinstance(q, Particle) and q.state is State.RETIRED
            and q.layer_mod4 == (layer - 1) % 4)


def clockwise(ctx: ActivationContext, down: int) -> tuple[int, int]:
    """Rotate away from ``down`` in both senses until a port clears the surface."""
    layer = ctx.p.layer_mod4
    looks = [ctx.look(label) for label in range(6)]
    j = down
    for _ in range(6):
        if not _is_lower_surface(ctx, looks[j], layer):
            break
        j = (j - 1) % 6
    else:
        raise AllPortsIncident("particle is enclosed by the surface")
    k = down
    for _ in range(6):
        if not _is_lower_surface(ctx, looks[k], layer):
            break
        k = (k + 1) % 6
    return j, k


def compute_layer(ctx: ActivationContext) -> bool:
    """Recompute layer, down, CW/CCW and dir from the surface neighbors.

    Returns False when the particle touches no surface (nothing is updated).
    """
    p = ctx.p
    looks = [ctx.look(label) for label in range(6)]
    if any(q is OBJECT for q in looks):
        layer = 1
        arc = [label for label in range(6) if looks[label] is OBJECT]
    else:
        below = {label: q.layer_mod4 for label, q in enumerate(looks)
                 if isinstance(q, Particle) and q.state is State.RETIRED}
        if not below:
            return False
        present = set(below.values())
        # Surface neighbors span at most two consecutive layers; take the lower.
        low = next(x for x in sorted(present) if (x - 1) % 4 not in present)
        layer = (low + 1) % 4
        arc = [label for label, x in below.items() if x == low]
    # The end of the surface arc: an intrinsic choice, independent of label offset.
    down = next((label for label in arc if (label - 1) % 6 not in arc), arc[0])
    p.down_port = down
    p.layer_mod4 = layer
    cw, ccw = clockwise(ctx, down)
    p.cw_port, p.ccw_port = cw, ccw
    p.dir_port = cw if p.layer_mod4 % 2 == 1 else ccw
    return True


def layer_extension(ctx: ActivationContext) -> bool:
    """Refresh layer/dir and expand along dir when allowed. True iff expanded."""
    if not compute_layer(ctx):
        return False
    return _extend(ctx)


def in_layer_one(ctx: ActivationContext) -> bool:
    p = ctx.p
    return p.down_port is not None and ctx.look(p.down_port) is OBJECT


def in_layer_one_tail(ctx: ActivationContext) -> bool:
    return any(q is OBJECT for _, q in ctx.tail_ports())


def _extend(ctx: ActivationContext) -> bool:
    p = ctx.p
    if p.dir_port is None or not ctx.cfg.free(p.port_node(p.dir_port)):
        return False
    if p.complaint_flags < 1 and in_layer_one(ctx):
        return False
    ctx.expand(p.dir_port)
    if p.complaint_flags > 0:
        ctx.consume_flag()
    return True


def marker_bisector(ctx: ActivationContext) -> int:
    """Port of the leader aimed away from layer 1, between its two ring neighbors."""
    p = ctx.p
    a, b = p.cw_port, p.ccw_port
    down = p.down_port
    gap = (b - a) % 6
    if gap % 2 == 0:
        c1 = (a + gap // 2) % 6
        options = [c1, (c1 + 3) % 6]
    else:
        c1 = (a + gap // 2) % 6
        options = [c1, (c1 + 1) % 6, (c1 + 3) % 6, (c1 + 4) % 6]

    def away(label):
        d = abs(label - down) % 6
        return min(d, 6 - d)

    options = [o for o in options if ctx.look(o) is not OBJECT] or options
    return max(options, key=lambda o: (away(o), -((o - down) % 6)))


def _retire(ctx: ActivationContext) -> None:
    ctx.p.set_state(State.RETIRED)
    ctx.dirty = True


def marker_retired_conditions(ctx: ActivationContext) -> bool:
    """First marker, extending-marker and retired conditions. True iff retired."""
    p = ctx.p
    if p.is_leader:
        _retire(ctx)
        p.is_marker = True
        p.marker_port = marker_bisector(ctx)
        return True
    for label, q in ctx.ports():
        if isinstance(q, Particle) and q.is_marker and ctx.marker_faces_me(q):
            cw = ctx.peer_port(q, "cw_port")
            ccw = ctx.peer_port(q, "ccw_port")
            if (isinstance(cw, Particle) and cw.state is State.RETIRED
                    and isinstance(ccw, Particle) and ccw.state is State.RETIRED):
                _retire(ctx)
                p.is_marker = True
                p.marker_port = (label + 3) % 6
                return True
    if p.dir_port is not None:
        q = ctx.look(p.dir_port)
        if isinstance(q, Particle) and q.state is State.RETIRED:
            _retire(ctx)
            return True
    return False


def handover_step(ctx: ActivationContext) -> bool:
    """The handover rules; True iff a handover happened."""
    p = ctx.p
    if p.expanded:
        tail_kids = _tail_children(ctx)
        if in_layer_one_tail(ctx):
            followers = [q for _, q in tail_kids if q.state is State.FOLLOWER]
            if followers:
                ready = [q for q in followers if q.contracted]
                if ready:
                    ctx.handover(ready[0])
                    return True
                return False
        for _, q in tail_kids:
            if q.contracted:
                ctx.handover(q)
                return True
        return False
    if p.state is State.FOLLOWER and p.parent_port is not None:
        q = ctx.look(p.parent_port)
        if isinstance(q, Particle) and ctx.is_tail_of(q, p.parent_port):
            ctx.handover(q)
            return True
    if p.state is State.ROOT and p.dir_port is not None:
        q = ctx.look(p.dir_port)
        if (isinstance(q, Particle) and q.state is State.ROOT and ctx.is_tail_of(q, p.dir_port)
                and not reserved_for_follower(ctx, q)):
            ctx.handover(q)
            return True
    return False


def reserved_for_follower(ctx: ActivationContext, q: Particle) -> bool:
    """An expanded layer-1 root keeps its tail for a waiting follower child.

    This is the bit q itself advertises; we derive it from q's tail neighborhood.
    """
    sub = ActivationContext(ctx.cfg, q, ctx.settings, ctx.strategy, ctx.flags)
    if not in_layer_one_tail(sub):
        return False
    return any(c.state is State.FOLLOWER for _, c in _tail_children(sub))


def _tail_children(ctx: ActivationContext) -> list[tuple[int, Particle]]:
    """Active neighbors of the tail whose pointer aims at it, by tail port label."""
    p = ctx.p
    out = []
    for label, q in ctx.tail_ports():
        if isinstance(q, Particle) and q is not p and q.active and ctx.points_at_my_tail(q):
            out.append((label, q))
    return out


def _has_idle_neighbor(ctx: ActivationContext) -> bool:
    p = ctx.p
    for origin in p.nodes():
        for label in range(6):
            q = ctx.look(label, origin)
            if isinstance(q, Particle) and q.state is State.IDLE:
                return True
    return False


def _expanded_step(ctx: ActivationContext) -> None:
    if handover_step(ctx):
        return
    if not _tail_children(ctx) and not _has_idle_neighbor(ctx):
        ctx.contract()


def _gain_flag(ctx: ActivationContext) -> None:
    p = ctx.p
    if p.complaint_flags < ctx.capacity:
        ctx.create_flag()


def _idle(ctx: ActivationContext) -> None:
    p = ctx.p
    looks = ctx.ports()
    if any(q is OBJECT for _, q in looks):
        p.set_state(State.ROOT)
        ctx.strategy.register(p.head)
        if ctx.settings.root_generates_flag:
            _gain_flag(ctx)
        compute_layer(ctx)
        return
    if any(isinstance(q, Particle) and q.state is State.RETIRED for _, q in looks):
        p.set_state(State.ROOT)
        if ctx.settings.root_generates_flag:
            _gain_flag(ctx)
        compute_layer(ctx)
        return
    for label, q in looks:
        if isinstance(q, Particle) and q.active:
            p.parent_port = label
            _gain_flag(ctx)
            p.set_state(State.FOLLOWER)
            return


def _touches_surface(ctx: ActivationContext) -> bool:
    for _, q in ctx.ports():
        if q is OBJECT or isinstance(q, Particle) and q.state is State.RETIRED:
            return True
    return False


def _follower(ctx: ActivationContext) -> None:
    p = ctx.p
    if p.contracted and _touches_surface(ctx):
        p.set_state(State.ROOT)
        p.parent_port = None
        compute_layer(ctx)
        return
    if p.expanded:
        _expanded_step(ctx)
        return
    if handover_step(ctx):
        return
    forward_complaint(ctx, p.parent_port)


def _root(ctx: ActivationContext) -> None:
    p = ctx.p
    if p.expanded:
        _expanded_step(ctx)
        return
    if not compute_layer(ctx):
        return
    if in_layer_one(ctx):
        leader_election_step(ctx, ctx.strategy)
    if marker_retired_conditions(ctx):
        return
    if handover_step(ctx):
        return
    if _extend(ctx):
        return
    forward_complaint(ctx, p.dir_port)


def _retired(ctx: ActivationContext) -> None:
    p = ctx.p
    if p.complaint_flags:
        ctx.clear_flags()


_DISPATCH = {
    State.IDLE: _idle,
    State.FOLLOWER: _follower,
    State.ROOT: _root,
    State.RETIRED: _retired,
}


def activate(ctx: ActivationContext) -> list[Movement]:
    """Run one atomic activation; returns the movements it produced."""
    before = ctx.p.memory()
    _DISPATCH[ctx.p.state](ctx)
    if ctx.moves or ctx.p.memory() != before:
        ctx.dirty = True
    return ctx.moves
