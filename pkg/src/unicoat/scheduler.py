"""Execution engines: fair asynchronous activation with round accounting, and the
synchronous parallel schedules used to bound it."""
from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

from .coating import (ActivationContext, CoatingSettings, FlagLedger, activate,
                      make_strategy)
from .core import (Configuration, Movement, MoveKind, Particle, State,
                   build_forest_graph)
from .grid import Node, direction_between, is_connected, layer_nodes
from .harness.instances import Instance


class RoundLimitExceeded(RuntimeError):
    def __init__(self, trace: "Trace"):
        super().__init__(f"no quiescence within {trace.limit} rounds")
        self.trace = trace


class InvariantViolation(AssertionError):
    """A simulator invariant broke; always a simulator bug."""


class IncompatibleTrace(RuntimeError):
    pass


class Policy(enum.Enum):
    RANDOM_PERMUTATION_ROUNDS = "permutation"
    UNIFORM_RANDOM_SINGLES = "uniform"
    SCRIPTED = "scripted"


@dataclass
class ActivationSequence:
    seed: int = 0
    policy: Policy = Policy.RANDOM_PERMUTATION_ROUNDS
    script: Sequence[int] | None = None

    def __post_init__(self):
        if isinstance(self.policy, str):
            self.policy = Policy(self.policy)
        if self.policy is Policy.SCRIPTED and not self.script:
            raise ValueError("scripted policy needs a non-empty script")

    def activations(self, ids: list[int]):
        """Yields (pid, closes_round) forever; rounds close on full coverage."""
        rng = random.Random(self.seed ^ 0x5EED)
        if self.policy is Policy.RANDOM_PERMUTATION_ROUNDS:
            order = list(ids)
            while True:
                rng.shuffle(order)
                for i, pid in enumerate(order):
                    yield pid, i == len(order) - 1
        pending = set(ids)
        k = 0
        while True:
            if self.policy is Policy.UNIFORM_RANDOM_SINGLES:
                pid = ids[rng.randrange(len(ids))]
            else:
                pid = self.script[k % len(self.script)]
                k += 1
            pending.discard(pid)
            done = not pending
            if done:
                pending = set(ids)
            yield pid, done


class Slot(NamedTuple):
    """A particle as seen by movement schedules: position, flags, forest parent."""

    head: Node
    tail: Node
    flags: int = 0
    parent: Node | None = None


@dataclass
class RoundRecord:
    index: int
    activations: list[int]
    movements: list[tuple[int, Movement]]
    flag_events: list[tuple]
    state_changes: list[tuple[int, str]]
    changed: bool
    snapshot: dict[int, Slot] | None = None

    def to_json(self) -> dict:
        d = {
            "round": self.index,
            "activations": self.activations,
            "movements": [dict(m.to_json(), event=e) for e, m in self.movements],
            "flag_events": [list(ev) for ev in self.flag_events],
            "state_changes": [list(s) for s in self.state_changes],
            "changed": self.changed,
        }
        if self.snapshot is not None:
            d["snapshot"] = {str(pid): _slot_json(s) for pid, s in sorted(self.snapshot.items())}
        return d


def _slot_json(s: Slot) -> list:
    return [list(s.head), list(s.tail), s.flags, None if s.parent is None else list(s.parent)]


def _forest_parent(p: Particle) -> Node | None:
    if p.state is State.FOLLOWER and p.parent_port is not None:
        return p.port_node(p.parent_port)
    if p.state is State.ROOT and p.adopted and p.dir_port is not None:
        return p.port_node(p.dir_port)
    return None


def snapshot(cfg: Configuration) -> dict[int, Slot]:
    return {pid: Slot(p.head, p.tail, p.complaint_flags, _forest_parent(p))
            for pid, p in cfg.particles.items()}


@dataclass
class Trace:
    instance: Instance
    seed: int
    policy: Policy
    settings: CoatingSettings
    offsets: dict[int, int]
    initial: dict[int, Slot]
    rounds: list[RoundRecord] = field(default_factory=list)
    final: Configuration | None = None
    quiesced: bool = False
    limit: int = 0
    rounds_to_quiescence: int | None = None
    layer_times: dict[int, int] = field(default_factory=dict)
    flags: FlagLedger | None = None
    retirement_order: list[int] = field(default_factory=list)
    leader: int | None = None
    activation_count: int = 0

    def movement_sequences(self) -> dict[int, list[tuple[int, Movement]]]:
        """M(p): each particle's movements in execution order, tagged by event."""
        out: dict[int, list[tuple[int, Movement]]] = {pid: [] for pid in self.initial}
        for rec in self.rounds:
            for event, m in rec.movements:
                out[m.actor].append((event, m))
        return out

    def flag_paths(self) -> dict[int, list[tuple]]:
        out: dict[int, list[tuple]] = {}
        for rec in self.rounds:
            for ev in rec.flag_events:
                out.setdefault(ev[1], []).append(ev)
        return out

    def header(self) -> dict:
        return {
            "instance": self.instance.to_json(),
            "seed": self.seed,
            "policy": self.policy.value,
            "settings": {"election": self.settings.election,
                         "root_generates_flag": self.settings.root_generates_flag,
                         "flag_capacity": self.settings.flag_capacity},
            "offsets": {str(k): v for k, v in sorted(self.offsets.items())},
            "initial": {str(pid): _slot_json(s) for pid, s in sorted(self.initial.items())},
            "limit": self.limit,
            "quiesced": self.quiesced,
            "rounds_to_quiescence": self.rounds_to_quiescence,
            "layer_times": {str(k): v for k, v in sorted(self.layer_times.items())},
        }

    def dumps(self) -> str:
        return dump_trace_records(self.header(), [r.to_json() for r in self.rounds])


def dump_trace_records(header: dict, rounds: list[dict]) -> str:
    """Canonical JSON-lines form: header line, then one line per round."""
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(r, sort_keys=True) for r in rounds)
    return "\n".join(lines) + "\n"


def load_trace_records(text: str) -> tuple[dict, list[dict]]:
    header, *rounds = [json.loads(line) for line in text.splitlines() if line.strip()]
    return header, rounds


def draw_offsets(n: int, seed: int) -> list[int]:
    rng = random.Random(seed * 2654435761 + 17)
    return [rng.randrange(6) for _ in range(n)]


def build_configuration(inst: Instance, offsets: Sequence[int] | None = None) -> Configuration:
    offsets = draw_offsets(inst.n, inst.seed) if offsets is None else offsets
    parts = [Particle(i, v, v, offsets[i]) for i, v in enumerate(inst.particles)]
    return Configuration(inst.object, parts)


class LayerClock:
    """Detects the first round at which each layer becomes complete."""

    def __init__(self, cfg: Configuration, n: int):
        self.layers: list[set[Node]] = []
        total = 0
        i = 1
        while total < n:
            nodes = layer_nodes(i, cfg.object)
            self.layers.append(nodes)
            total += len(nodes)
            i += 1
        self.final = len(self.layers)
        self.current = 1
        self.times: dict[int, int] = {}

    def tick(self, cfg: Configuration, rnd: int) -> None:
        while self.current < self.final:
            for v in self.layers[self.current - 1]:
                q = cfg.occ.get(v)
                if q is None or q.state is not State.RETIRED or q.expanded:
                    return
            self.times[self.current] = rnd
            self.current += 1


def run_async(instance: Instance, seq: ActivationSequence | None = None, limit: int | None = None,
              settings: CoatingSettings | None = None, offsets: Sequence[int] | None = None,
              record: str = "full", check_invariants: bool = False,
              raise_on_limit: bool = False) -> Trace:
    """Execute activations until a full round changes nothing, or ``limit`` rounds.

    ``record`` is "full" (movements, flag events and per-round snapshots),
    "moves" (no snapshots) or "none" (summary only).
    """
    seq = seq or ActivationSequence(seed=instance.seed)
    settings = settings or CoatingSettings()
    n = instance.n
    limit = limit if limit is not None else 50 * max(n, 1)
    offsets = list(draw_offsets(n, seq.seed) if offsets is None else offsets)
    cfg = build_configuration(instance, offsets)
    strategy = make_strategy(settings, cfg, seq.seed ^ 0xE1EC7)
    flags = FlagLedger()
    trace = Trace(instance, seq.seed, seq.policy, settings, dict(enumerate(offsets)),
                  snapshot(cfg), limit=limit, flags=flags)
    clock = LayerClock(cfg, n)
    ids = sorted(cfg.particles)
    keep = record != "none"
    event = 0
    rnd = 1
    last_change = 0
    acts: list[int] = []
    moves: list[tuple[int, Movement]] = []
    changes: list[tuple[int, str]] = []
    changed = False
    flag_mark = 0
    particles = cfg.particles
    for pid, closes in seq.activations(ids):
        p = particles[pid]
        st = p.state
        ctx = ActivationContext(cfg, p, settings, strategy, flags)
        ms = activate(ctx)
        trace.activation_count += 1
        if ctx.dirty:
            changed = True
        if keep:
            acts.append(pid)
            if ms:
                moves.extend((event, m) for m in ms)
        if ms:
            event += 1
        if p.state is not st:
            if keep:
                changes.append((pid, p.state.value))
            if p.state is State.RETIRED:
                trace.retirement_order.append(pid)
                if p.is_leader:
                    trace.leader = pid
        if check_invariants:
            _check(cfg, settings, flags)
        if not closes:
            continue
        clock.tick(cfg, rnd)
        if keep:
            trace.rounds.append(RoundRecord(
                rnd, acts, moves, flags.events[flag_mark:], changes, changed,
                snapshot(cfg) if record == "full" else None))
        flag_mark = len(flags.events)
        if not keep:
            flags.events.clear()
            flag_mark = 0
        acts, moves, changes = [], [], []
        if changed:
            last_change = rnd
        elif strategy.dormant():
            trace.quiesced = True
            break
        changed = False
        if rnd >= limit:
            break
        rnd += 1
    trace.final = cfg
    trace.rounds_to_quiescence = last_change if trace.quiesced else None
    if trace.quiesced:
        clock.times.setdefault(clock.final, last_change)
        for i in range(clock.current, clock.final):
            clock.times.setdefault(i, last_change)
    trace.layer_times = clock.times
    if not trace.quiesced and raise_on_limit:
        raise RoundLimitExceeded(trace)
    return trace


def _check(cfg: Configuration, settings: CoatingSettings, flags: FlagLedger) -> None:
    try:
        cfg.check_occupancy()
    except AssertionError as e:
        raise InvariantViolation(str(e)) from e
    if not cfg.connected():
        raise InvariantViolation("particle system disconnected from the object")
    held = 0
    for p in cfg:
        if p.complaint_flags > settings.flag_capacity or p.complaint_flags < 0:
            raise InvariantViolation(f"particle {p.id} holds {p.complaint_flags} flags")
        if p.state is State.RETIRED and p.expanded:
            raise InvariantViolation(f"retired particle {p.id} is expanded")
        held += p.complaint_flags
    if held != flags.balance():
        raise InvariantViolation("complaint flags not conserved")
    # Roots circling a fully occupied layer may close one cycle, never two.
    if len(build_forest_graph(cfg).cycles()) > 1:
        raise InvariantViolation("forest graph has more than one cycle")


# -- parallel schedules ----------------------------------------------------------


class Mode(enum.Enum):
    PARALLEL = "parallel"
    COMPLAINT = "complaint"


@dataclass
class ParallelSchedule:
    object: frozenset[Node]
    configurations: list[dict[int, Slot]]
    mode: Mode = Mode.PARALLEL
    moves_done: list[dict[int, int]] = field(default_factory=list)
    flag_hops_done: list[dict[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.configurations)


@dataclass
class Violation:
    step: int
    particle: int | None
    reason: str

    def __str__(self) -> str:
        who = "" if self.particle is None else f" particle {self.particle}"
        return f"step {self.step}{who}: {self.reason}"


def _nodes(s: Slot) -> tuple[Node, ...]:
    return (s.head,) if s.head == s.tail else (s.head, s.tail)


def _config_problems(cfg: dict[int, Slot], obj: frozenset[Node], step: int,
                     mode: Mode) -> list[Violation]:
    out = []
    seen: dict[Node, int] = {}
    for pid, s in cfg.items():
        if s.head != s.tail and direction_between(s.head, s.tail) is None:
            out.append(Violation(step, pid, "head and tail not adjacent"))
        for v in _nodes(s):
            if v in obj:
                out.append(Violation(step, pid, f"occupies object node {tuple(v)}"))
            if v in seen:
                out.append(Violation(step, pid, f"shares node {tuple(v)} with {seen[v]}"))
            seen[v] = pid
        if mode is Mode.COMPLAINT and s.flags > 1:
            out.append(Violation(step, pid, f"holds {s.flags} complaint flags (max 1)"))
    return out


def validate_parallel_schedule(sched: ParallelSchedule) -> list[Violation]:
    """Every configuration valid; every step made of legal per-particle moves."""
    out: list[Violation] = []
    confs = sched.configurations
    for i, c in enumerate(confs):
        out.extend(_config_problems(c, sched.object, i, sched.mode))
    for i in range(len(confs) - 1):
        out.extend(_step_problems(confs[i], confs[i + 1], i + 1, sched.mode))
    return out


def _step_problems(a: dict[int, Slot], b: dict[int, Slot], step: int,
                   mode: Mode) -> list[Violation]:
    out = []
    occ_a = {v: pid for pid, s in a.items() for v in _nodes(s)}
    occ_b = {v: pid for pid, s in b.items() for v in _nodes(s)}
    kinds: dict[int, str] = {}
    for pid, s in a.items():
        t = b[pid]
        if (s.head, s.tail) == (t.head, t.tail):
            kinds[pid] = "stay"
        elif s.head == s.tail and t.tail == s.head and t.head != t.tail:
            owner = occ_a.get(t.head)
            if owner is None:
                kinds[pid] = "expand"
            else:
                o_a, o_b = a[owner], b[owner]
                if o_a.head != o_a.tail and o_a.tail == t.head and o_b.head == o_b.tail == o_a.head:
                    kinds[pid] = "handover-expand"
                else:
                    out.append(Violation(step, pid, "expands into an occupied node without a handover"))
        elif s.head != s.tail and t.head == t.tail == s.head:
            other = occ_b.get(s.tail)
            if other is None:
                kinds[pid] = "contract"
            else:
                o_a, o_b = a[other], b[other]
                if o_a.head == o_a.tail and o_b.tail == o_a.head and o_b.head == s.tail:
                    kinds[pid] = "handover-contract"
                else:
                    out.append(Violation(step, pid, "tail reoccupied without a handover"))
        else:
            out.append(Violation(step, pid, "more than one expansion or contraction in one step"))
    if mode is Mode.COMPLAINT:
        lost = {pid for pid in a if b[pid].flags < a[pid].flags}
        gained = {pid for pid in a if b[pid].flags > a[pid].flags}
        for pid in gained:
            if a[pid].flags > 0 and pid not in lost:
                out.append(Violation(step, pid, "receives a flag while holding one"))
        total_a = sum(s.flags for s in a.values())
        total_b = sum(s.flags for s in b.values())
        expansions = sum(1 for pid, k in kinds.items() if k == "expand")
        if total_b > total_a or total_a - total_b > expansions:
            out.append(Violation(step, None, "flag count changed without consuming expansions"))
        for pid, k in kinds.items():
            if k == "expand" and pid in lost and a[pid].flags < 1:
                out.append(Violation(step, pid, "expansion consumed a flag it did not hold"))
    return out


def build_greedy_forest_schedule(trace: Trace, mode: Mode = Mode.PARALLEL,
                                 order_seed: int | None = None) -> ParallelSchedule:
    """Replay every particle's movement sequence, applying in each step a maximal
    set of mutually compatible next movements.

    In complaint mode, flags replay their recorded hops too; an expansion that
    consumed a flag waits until that flag has arrived, and a particle holds at
    most one flag at a time unless its own flag leaves in the same step.
    """
    seqs = trace.movement_sequences()
    obj = frozenset(trace.instance.object)
    cur = dict(trace.initial)
    rng = random.Random(trace.seed if order_seed is None else order_seed)
    order = sorted(cur)
    rng.shuffle(order)
    idx = {pid: 0 for pid in cur}
    done_moves = {pid: 0 for pid in cur}
    parents = _parent_after(trace)

    complaint = mode is Mode.COMPLAINT
    fpaths: dict[int, list[tuple]] = {}
    fidx: dict[int, int] = {}
    holder: dict[int, int] = {}
    consumed_by: dict[tuple[int, int], int] = {}
    if complaint:
        for fid, evs in trace.flag_paths().items():
            # Flags later cleared by retired particles never pay for a movement.
            if evs[-1][0] != "consume":
                continue
            creator = evs[0][2]
            holder[fid] = creator
            fpaths[fid] = [ev for ev in evs[1:] if ev[0] in ("move", "consume")]
            fidx[fid] = 0
        cur = {pid: s._replace(flags=0) for pid, s in cur.items()}
        for fid, pid in holder.items():
            cur[pid] = cur[pid]._replace(flags=cur[pid].flags + 1)
        consumed_by = _consumption_events(trace)

    confs = [cur]
    moves_log = [dict(done_moves)]
    hops_log = [dict(fidx)] if complaint else []
    remaining = sum(len(v) for v in seqs.values())
    remaining_hops = sum(len(v) for v in fpaths.values())
    while remaining or remaining_hops:
        occ = {v: pid for pid, s in cur.items() for v in _nodes(s)}
        busy: set[int] = set()
        claimed: set[Node] = set()
        step_moves: list[tuple[int, Movement]] = []
        consumes: list[int] = []
        for pid in order:
            if pid in busy or idx[pid] >= len(seqs[pid]):
                continue
            event, m = seqs[pid][idx[pid]]
            s = cur[pid]
            if m.kind is MoveKind.SOLE_EXPANSION:
                if s.head != s.tail or s.head != m.node_from:
                    continue
                if m.node_to in occ or m.node_to in obj or m.node_to in claimed:
                    continue
                if complaint:
                    fid = consumed_by.get((pid, event))
                    if fid is not None:
                        k = fidx[fid]
                        path = fpaths[fid]
                        if holder.get(fid) != pid or k >= len(path) or path[k][0] != "consume":
                            continue
                        consumes.append(fid)
                claimed.add(m.node_to)
                busy.add(pid)
                step_moves.append((pid, m))
            elif m.kind is MoveKind.SOLE_CONTRACTION:
                if s.head == s.tail or s.tail != m.node_from:
                    continue
                busy.add(pid)
                step_moves.append((pid, m))
            else:
                q = m.partner
                if q in busy or idx[q] >= len(seqs[q]):
                    continue
                e2, m2 = seqs[q][idx[q]]
                if e2 != event:
                    continue
                busy.update((pid, q))
                step_moves.append((pid, m))
                step_moves.append((q, m2))
        hop_moves: list[tuple[int, int, int]] = []
        if complaint:
            hop_moves = _select_hops(cur, holder, fpaths, fidx,
                                     {holder[fid] for fid in consumes})
        if not step_moves and not hop_moves:
            raise IncompatibleTrace(
                f"no enabled movement with {remaining} movements and {remaining_hops} hops pending")
        nxt = dict(cur)
        for pid, m in step_moves:
            s = nxt[pid]
            par = parents.get((pid, idx[pid]), s.parent)
            if m.kind in (MoveKind.SOLE_EXPANSION, MoveKind.HANDOVER_EXPANSION):
                nxt[pid] = s._replace(head=m.node_to, tail=s.head, parent=par)
            else:
                nxt[pid] = s._replace(tail=s.head, parent=par)
            idx[pid] += 1
            done_moves[pid] += 1
            remaining -= 1
        for fid in consumes:
            pid = holder.pop(fid)
            nxt[pid] = nxt[pid]._replace(flags=nxt[pid].flags - 1)
            fidx[fid] += 1
            remaining_hops -= 1
        for fid, src, dst in hop_moves:
            holder[fid] = dst
            nxt[src] = nxt[src]._replace(flags=nxt[src].flags - 1)
            nxt[dst] = nxt[dst]._replace(flags=nxt[dst].flags + 1)
            fidx[fid] += 1
            remaining_hops -= 1
        cur = nxt
        confs.append(cur)
        moves_log.append(dict(done_moves))
        if complaint:
            hops_log.append(dict(fidx))
    return ParallelSchedule(obj, confs, mode, moves_log, hops_log)


def _select_hops(cur, holder, fpaths, fidx, consuming: set[int]) -> list[tuple[int, int, int]]:
    """Flag forwards for one complaint-based step: a particle may receive a
    flag only if it holds none or its own flag leaves in the same step."""
    want: dict[int, tuple[int, int]] = {}
    for fid, src in holder.items():
        path = fpaths[fid]
        k = fidx[fid]
        if k >= len(path) or path[k][0] != "move":
            continue
        _, _, a, b = path[k]
        if a != src or not any(_adjacent_slots(cur[a], cur[b])):
            continue
        want[fid] = (a, b)
    chosen: dict[int, tuple[int, int]] = {}
    taken: set[int] = set()
    for fid in sorted(want):
        a, b = want[fid]
        if b not in taken:
            taken.add(b)
            chosen[fid] = (a, b)
    while True:
        leaving = {a for a, _ in chosen.values()} | consuming
        drop = [fid for fid, (a, b) in chosen.items() if cur[b].flags > 0 and b not in leaving]
        if not drop:
            break
        for fid in drop:
            del chosen[fid]
    return [(fid, a, b) for fid, (a, b) in sorted(chosen.items())]


def _adjacent_slots(a: Slot, b: Slot):
    for u in _nodes(a):
        for v in _nodes(b):
            yield direction_between(u, v) is not None


def _consumption_events(trace: Trace) -> dict[tuple[int, int], int]:
    """(particle, movement event) -> id of the flag that expansion consumed."""
    out = {}
    for rec in trace.rounds:
        pending = {}
        for ev in rec.flag_events:
            if ev[0] == "consume":
                pending.setdefault(ev[2], []).append(ev[1])
        for event, m in rec.movements:
            if m.kind is MoveKind.SOLE_EXPANSION and pending.get(m.actor):
                out[(m.actor, event)] = pending[m.actor].pop(0)
    return out


def _parent_after(trace: Trace) -> dict[tuple[int, int], Node | None]:
    """Forest parent of each particle right after its k-th movement, from snapshots."""
    out = {}
    counts: dict[int, int] = {}
    for rec in trace.rounds:
        movers = [m.actor for _, m in rec.movements]
        for pid in movers:
            counts[pid] = counts.get(pid, 0) + 1
        if rec.snapshot is None:
            continue
        for pid in set(movers):
            out[(pid, counts[pid] - 1)] = rec.snapshot[pid].parent
    return out


def async_progress(trace: Trace) -> list[dict[int, int]]:
    """Movements completed by each particle at every round boundary (index 0 = start)."""
    done = {pid: 0 for pid in trace.initial}
    out = [dict(done)]
    for rec in trace.rounds:
        for _, m in rec.movements:
            done[m.actor] += 1
        out.append(dict(done))
    return out


def async_flag_progress(trace: Trace) -> list[dict[int, int]]:
    done: dict[int, int] = {}
    out = [dict(done)]
    for rec in trace.rounds:
        for ev in rec.flag_events:
            if ev[0] in ("move", "consume"):
                done[ev[1]] = done.get(ev[1], 0) + 1
        out.append(dict(done))
    return out


def path_of(trace: Trace, pid: int) -> list[Node]:
    """P_p: the walk of nodes the particle's head visits, start to end."""
    walk = [trace.initial[pid].head]
    for _, m in trace.movement_sequences()[pid]:
        if m.kind in (MoveKind.SOLE_EXPANSION, MoveKind.HANDOVER_EXPANSION):
            walk.append(m.node_to)
    return walk


def head_tail_distance(moves_total: int, moves_done: int) -> tuple[int, int]:
    """(d_h, d_t) along P_p after ``moves_done`` of ``moves_total`` alternating moves.

    Expansions and contractions alternate, so the head has advanced
    ceil(done/2) edges and the tail floor(done/2).
    """
    length = (moves_total + 1) // 2
    return length - (moves_done + 1) // 2, length - moves_done // 2


def check_dominance(trace: Trace, sched: ParallelSchedule) -> Violation | None:
    """First (round, particle or flag) where the asynchronous configuration fails
    to dominate the parallel one: d(p, C_i^A) <= d(p, C_i) for head, tail and,
    in complaint mode, every flag's remaining hops."""
    totals = {pid: len(v) for pid, v in trace.movement_sequences().items()}
    prog = async_progress(trace)
    fprog = async_flag_progress(trace) if sched.mode is Mode.COMPLAINT else None
    tracked = sched.flag_hops_done[0] if sched.flag_hops_done else {}
    ftotal = {fid: len([e for e in evs if e[0] in ("move", "consume")])
              for fid, evs in trace.flag_paths().items() if fid in tracked}
    for i in range(len(sched.configurations)):
        a = prog[min(i, len(prog) - 1)]
        g = sched.moves_done[i]
        for pid in sorted(totals):
            ah, at = head_tail_distance(totals[pid], a[pid])
            gh, gt = head_tail_distance(totals[pid], g[pid])
            if ah > gh or at > gt:
                return Violation(i, pid, f"async distances (h={ah}, t={at}) exceed parallel (h={gh}, t={gt})")
        if fprog is not None:
            af = fprog[min(i, len(fprog) - 1)]
            gf = sched.flag_hops_done[i]
            for fid in sorted(ftotal):
                if ftotal[fid] - af.get(fid, 0) > ftotal[fid] - gf.get(fid, 0):
                    return Violation(i, None, f"flag {fid} is further from its end asynchronously")
    return None


def check_expanded_parent_invariant(sched: ParallelSchedule, require_pre: bool = True) -> Violation | None:
    """Every expanded parent keeps at least one contracted child (checked for every C_i)."""
    confs = sched.configurations
    first = _expanded_parent_problem(confs[0], 0)
    if first is not None:
        if require_pre:
            raise ValueError(f"precondition fails in C_0: {first}")
        return first
    for i in range(1, len(confs)):
        bad = _expanded_parent_problem(confs[i], i)
        if bad is not None:
            return bad
    return None


def _expanded_parent_problem(cfg: dict[int, Slot], step: int) -> Violation | None:
    owner = {v: pid for pid, s in cfg.items() for v in _nodes(s)}
    kids: dict[int, list[int]] = {}
    for pid, s in cfg.items():
        if s.parent is None:
            continue
        par = owner.get(s.parent)
        if par is not None and par != pid:
            kids.setdefault(par, []).append(pid)
    for par, ch in sorted(kids.items()):
        ps = cfg[par]
        if ps.head == ps.tail:
            continue
        if not any(cfg[c].head == cfg[c].tail for c in ch):
            return Violation(step, par, "expanded parent whose children are all expanded")
    return None


# -- forest-path executor -------------------------------------------------------------


@dataclass
class ForestPathRun:
    steps: int
    filled_at: int | None
    configurations: list[dict[int, Slot]]


def run_forest_path(path: Sequence[Node], branches: dict[int, list[Node]],
                    k: int, max_steps: int | None = None) -> ForestPathRun:
    """Greedy parallel execution of trees rooted on ``path`` = v_1..v_l.

    ``branches`` maps a particle id to its route into the path: a list of
    nodes ending at some v_j (the particle starts contracted on the first node).
    Particles traverse the path toward v_l; a particle is finished when it sits
    on v_l or directly behind a finished contracted particle. Each step applies
    every compatible movement: finished or blocked super-roots wait, a contracted
    super-root expands forward into an empty node, an expanded particle hands
    over to a contracted child whose next node is its tail or contracts alone if
    it has no child.
    """
    ell = len(path)
    routes = {}
    for pid, pre in branches.items():
        j = path.index(pre[-1])
        routes[pid] = list(pre) + list(path[j + 1:])
    pos = {pid: 0 for pid in routes}  # index of head on its route
    tailpos = {pid: 0 for pid in routes}
    max_steps = max_steps or 4 * (ell + len(routes)) + 10
    target = set(path[ell - k:])

    def slot(pid):
        r = routes[pid]
        return Slot(r[pos[pid]], r[tailpos[pid]])

    confs = [{pid: slot(pid) for pid in routes}]
    filled = None
    for step in range(max_steps + 1):
        cfg = confs[-1]
        occ = {v: pid for pid, s in cfg.items() for v in _nodes(s)}
        if filled is None and all(v in occ and cfg[occ[v]].head == cfg[occ[v]].tail for v in target):
            filled = step
            break
        finished = set()
        for v in reversed(path):
            pid = occ.get(v)
            if pid is None or cfg[pid].head != cfg[pid].tail:
                break
            finished.add(pid)

        def next_node(pid):
            r = routes[pid]
            return r[pos[pid] + 1] if pos[pid] + 1 < len(r) else None

        busy: set[int] = set()
        new_pos = dict(pos)
        new_tail = dict(tailpos)
        # children: contracted particles whose next node is some particle's tail
        for pid in sorted(routes):
            s = cfg[pid]
            if s.head == s.tail or pid in busy:
                continue
            child = None
            has_child = False
            for c in sorted(routes):
                if c == pid:
                    continue
                if next_node(c) == s.tail and cfg[c].head == cfg[c].tail:
                    has_child = True
                    if c not in busy and child is None:
                        child = c
            if child is not None:
                busy.update((pid, child))
                new_tail[pid] = pos[pid]
                new_pos[child] = pos[child] + 1
            elif not has_child and not any(next_node(c) == s.tail for c in routes if c != pid):
                busy.add(pid)
                new_tail[pid] = pos[pid]
        claimed = set()
        for pid in sorted(routes):
            s = cfg[pid]
            if pid in busy or s.head != s.tail or pid in finished:
                continue
            nxt = next_node(pid)
            if nxt is None or nxt in occ or nxt in claimed:
                continue
            claimed.add(nxt)
            busy.add(pid)
            new_pos[pid] = pos[pid] + 1
        if not busy:
            break
        pos, tailpos = new_pos, new_tail
        confs.append({pid: slot(pid) for pid in routes})
    return ForestPathRun(len(confs) - 1, filled, confs)


def is_connected_schedule_config(cfg: dict[int, Slot], obj: Iterable[Node]) -> bool:
    nodes = {v for s in cfg.values() for v in _nodes(s)} | set(obj)
    return is_connected(nodes)
