import pytest
from hypothesis import given, settings, strategies as st

from oracles import flood_connected
from unicoat.core import (AlreadyContracted, AlreadyExpanded, Configuration, IllegalHandover,
                          IllegalTransition, MoveKind, Movement, Particle, State, TargetOccupied,
                          build_forest_graph, super_roots)
from unicoat.grid import Node, direction_between, layer_nodes, neighbor
from unicoat.harness.instances import gen_hexagon
from unicoat.scheduler import ActivationSequence, run_async


def cfg_with(*parts, obj=((0, -5),)):
    return Configuration(obj, parts)


def test_expand_contract_translate():
    cfg = cfg_with(Particle(0, Node(0, 0), Node(0, 0)))
    [m] = cfg.expand(0, 0)
    p = cfg.particles[0]
    assert (p.head, p.tail) == ((1, 0), (0, 0))
    assert m.kind is MoveKind.SOLE_EXPANSION
    cfg.contract(0)
    assert p.nodes() == ((1, 0),)
    assert (0, 0) not in cfg.occ
    with pytest.raises(AlreadyContracted):
        cfg.contract(0)


def test_expand_respects_local_offset():
    cfg = cfg_with(Particle(0, Node(0, 0), Node(0, 0), chirality_offset=2))
    cfg.expand(0, 0)
    assert cfg.particles[0].head == neighbor((0, 0), 2)


def test_expand_errors():
    cfg = cfg_with(Particle(0, Node(0, 0), Node(0, 0)), Particle(1, Node(1, 0), Node(1, 0)))
    with pytest.raises(TargetOccupied):
        cfg.expand(0, 0)
    cfg.expand(0, 3)
    with pytest.raises(AlreadyExpanded):
        cfg.expand(0, 1)
    obj_cfg = Configuration([(1, 0)], [Particle(0, Node(0, 0), Node(0, 0))])
    with pytest.raises(TargetOccupied):
        obj_cfg.expand(0, 0)


def test_handover_push_and_parent_preserved():
    # expanded parent on {a=(0,0), b=(1,0)} with head b; child at c=(-1,0) aimed at a
    par = Particle(0, Node(1, 0), Node(0, 0), state=State.FOLLOWER)
    child = Particle(1, Node(-1, 0), Node(-1, 0), state=State.FOLLOWER, parent_port=0)
    cfg = cfg_with(par, child)
    before = set(cfg.occ)
    ms = cfg.handover(1, 0)
    assert par.nodes() == ((1, 0),)
    assert (child.head, child.tail) == ((0, 0), (-1, 0))
    assert child.port_node(child.parent_port) == par.head
    assert set(cfg.occ) == before
    kinds = sorted(m.kind.value for m in ms)
    assert kinds == ["handover_contraction", "handover_expansion"]


def test_handover_errors():
    a = Particle(0, Node(0, 0), Node(0, 0))
    b = Particle(1, Node(1, 0), Node(1, 0))
    cfg = cfg_with(a, b)
    with pytest.raises(IllegalHandover):
        cfg.handover(0, 1)
    cfg.expand(1, 0)  # b now {(1,0),(2,0)}, tail (1,0)
    far = Particle(2, Node(5, 5), Node(5, 5))
    cfg.add(far)
    with pytest.raises(IllegalHandover):
        cfg.handover(2, 1)


def test_state_transitions():
    p = Particle(0, Node(0, 0), Node(0, 0))
    with pytest.raises(IllegalTransition):
        p.set_state(State.RETIRED)
    p.set_state(State.FOLLOWER)
    with pytest.raises(IllegalTransition):
        p.set_state(State.IDLE)
    p.set_state(State.ROOT)
    p.set_state(State.RETIRED)
    for s in State:
        if s is not State.RETIRED:
            with pytest.raises(IllegalTransition):
                p.set_state(s)


@given(st.integers(0, 5), st.integers(0, 5))
def test_port_mapping_preserves_clockwise(offset, label):
    p = Particle(0, Node(0, 0), Node(0, 0), chirality_offset=offset)
    g = p.to_global(label)
    assert p.to_local(g) == label
    assert p.to_global((label + 1) % 6) == (g + 1) % 6
    assert p.label_to(p.port_node(label)) == label


def test_movement_json_roundtrip():
    m = Movement(MoveKind.HANDOVER_EXPANSION, 3, Node(0, 0), Node(1, 0), 4)
    assert Movement.from_json(m.to_json()) == m


def test_forest_graph_examples():
    idle = cfg_with(Particle(0, Node(0, 0), Node(0, 0)))
    assert not build_forest_graph(idle).edges
    chain = cfg_with(
        Particle(0, Node(0, 0), Node(0, 0), state=State.ROOT),
        Particle(1, Node(1, 0), Node(1, 0), state=State.FOLLOWER, parent_port=3),
        Particle(2, Node(2, 0), Node(2, 0), state=State.FOLLOWER, parent_port=3),
    )
    fg = build_forest_graph(chain)
    assert fg.edges == {(1, 0): (0, 0), (2, 0): (1, 0)}
    assert all(fg.out_degree(v) <= 1 for v in fg.vertices)
    assert super_roots(fg, chain) == [0]


def test_two_trees_two_super_roots():
    cfg = cfg_with(
        Particle(0, Node(0, 0), Node(0, 0), state=State.ROOT, dir_port=3),
        Particle(1, Node(5, 0), Node(5, 0), state=State.ROOT, dir_port=0),
    )
    assert super_roots(build_forest_graph(cfg), cfg) == [0, 1]


def test_full_ring_has_no_super_root_and_one_cycle():
    obj = [(0, 0)]
    ring = sorted(layer_nodes(1, obj), key=lambda v: direction_between((0, 0), v))
    parts = []
    for i, v in enumerate(ring):
        nxt = ring[(i + 1) % 6]
        parts.append(Particle(i, v, v, state=State.ROOT, dir_port=direction_between(v, nxt),
                              adopted=True))
    cfg = Configuration(obj, parts)
    fg = build_forest_graph(cfg)
    assert super_roots(fg, cfg) == []
    assert len(fg.cycles()) == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 3), st.integers(1, 30), st.integers(0, 10**6))
def test_runs_keep_occupancy_connectivity_and_forest(radius, n, seed):
    inst = gen_hexagon(radius, n, seed)
    trace = run_async(inst, ActivationSequence(seed=seed), check_invariants=True)
    for rec in trace.rounds:
        nodes = set(inst.object)
        for s in rec.snapshot.values():
            assert s.head == s.tail or direction_between(s.head, s.tail) is not None
            assert not ({s.head, s.tail} & set(inst.object))
            nodes |= {s.head, s.tail}
        assert sum(1 if s.head == s.tail else 2 for s in rec.snapshot.values()) \
            == len(nodes) - len(inst.object)
        assert flood_connected(nodes)
    assert all(p.contracted for p in trace.final if p.state is State.RETIRED)
