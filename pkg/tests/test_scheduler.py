import pytest
from hypothesis import given, settings, strategies as st

from forest_fixtures import all_fixtures, comb, comb_ok
from unicoat.analysis import is_legal
from unicoat.coating import CoatingSettings
from unicoat.core import MoveKind, State
from unicoat.grid import Node, layer_nodes
from unicoat.harness.instances import Instance, gen_hexagon, gen_line_lemma1
from unicoat.scheduler import (ActivationSequence, IncompatibleTrace, Mode, ParallelSchedule,
                               Policy, RoundLimitExceeded, Slot, build_greedy_forest_schedule,
                               check_dominance, check_expanded_parent_invariant,
                               head_tail_distance, path_of, run_async, run_forest_path,
                               validate_parallel_schedule)

OBJ = frozenset({Node(0, 0)})


# -- activation sequences ---------------------------------------------------------------


@pytest.mark.parametrize("policy", ["permutation", "uniform"])
def test_rounds_close_exactly_on_full_coverage(policy):
    ids = list(range(7))
    gen = ActivationSequence(seed=5, policy=policy).activations(ids)
    seen = set()
    rounds = 0
    for _ in range(2000):
        pid, closes = next(gen)
        seen.add(pid)
        assert closes == (seen == set(ids))
        if closes:
            seen = set()
            rounds += 1
    assert rounds > 10


def test_scripted_policy():
    gen = ActivationSequence(policy="scripted", script=[2, 0, 1]).activations([0, 1, 2])
    assert [next(gen) for _ in range(4)] == [(2, False), (0, False), (1, True), (2, False)]
    with pytest.raises(ValueError):
        ActivationSequence(policy=Policy.SCRIPTED)


# -- run_async ----------------------------------------------------------------------------


def test_contracted_ring_quiesces_retired():
    inst = Instance([(0, 0)], sorted(layer_nodes(1, [(0, 0)])))
    trace = run_async(inst, ActivationSequence(seed=1))
    assert trace.quiesced and is_legal(trace.final)
    assert all(p.state is State.RETIRED for p in trace.final)


def test_line_instance_takes_at_least_n_rounds():
    for seed in range(5):
        trace = run_async(gen_line_lemma1(8), ActivationSequence(seed=seed))
        assert trace.quiesced and trace.rounds_to_quiescence >= 8


def test_trace_is_deterministic():
    inst = gen_hexagon(2, 25, 4)
    for election in ("oracle", "randomized"):
        s = CoatingSettings(election=election)
        a = run_async(inst, ActivationSequence(seed=9), settings=s).dumps()
        b = run_async(inst, ActivationSequence(seed=9), settings=s).dumps()
        assert a == b


def test_round_limit():
    inst = gen_hexagon(2, 40, 0)
    trace = run_async(inst, ActivationSequence(seed=0), limit=3)
    assert not trace.quiesced and trace.rounds_to_quiescence is None
    assert len(trace.rounds) == 3
    with pytest.raises(RoundLimitExceeded) as err:
        run_async(inst, ActivationSequence(seed=0), limit=3, raise_on_limit=True)
    assert err.value.trace.limit == 3


def test_every_particle_activated_each_round():
    trace = run_async(gen_hexagon(1, 20, 2), ActivationSequence(seed=2, policy="uniform"))
    ids = set(trace.initial)
    for rec in trace.rounds:
        assert set(rec.activations) == ids


def test_layer_times_monotone():
    trace = run_async(gen_hexagon(1, 60, 3), ActivationSequence(seed=3))
    times = [trace.layer_times[i] for i in sorted(trace.layer_times)]
    assert times == sorted(times)
    assert times[-1] == trace.rounds_to_quiescence


# -- parallel schedule validation -----------------------------------------------------------


def _sched(*confs, mode=Mode.PARALLEL):
    return ParallelSchedule(OBJ, list(confs), mode)


def test_validator_rejects_double_move():
    a = {0: Slot(Node(1, 0), Node(1, 0))}
    b = {0: Slot(Node(2, 0), Node(2, 0))}
    assert validate_parallel_schedule(_sched(a, b))


def test_validator_accepts_handover_pair():
    a = {0: Slot(Node(2, 0), Node(1, 0)), 1: Slot(Node(1, 1), Node(1, 1))}
    b = {0: Slot(Node(2, 0), Node(2, 0)), 1: Slot(Node(1, 0), Node(1, 1))}
    assert validate_parallel_schedule(_sched(a, b)) == []


def test_validator_flag_capacity_in_complaint_mode():
    a = {0: Slot(Node(1, 0), Node(1, 0), flags=2)}
    assert validate_parallel_schedule(_sched(a, mode=Mode.COMPLAINT))
    assert validate_parallel_schedule(_sched(a)) == []


def test_validator_rejects_expansion_into_occupied_node():
    a = {0: Slot(Node(1, 0), Node(1, 0)), 1: Slot(Node(2, 0), Node(2, 0))}
    b = {0: Slot(Node(2, 0), Node(1, 0)), 1: Slot(Node(2, 0), Node(2, 0))}
    assert validate_parallel_schedule(_sched(a, b))


# -- greedy replay -----------------------------------------------------------------------------


def _trace(n=12, seed=0, radius=1, **kw):
    return run_async(gen_hexagon(radius, n, seed), ActivationSequence(seed=seed), **kw)


def test_quiescent_start_gives_length_one_schedule():
    inst = Instance([(0, 0)], sorted(layer_nodes(1, [(0, 0)])))
    trace = run_async(inst, ActivationSequence(seed=0))
    assert not any(rec.movements for rec in trace.rounds)
    sched = build_greedy_forest_schedule(trace)
    assert len(sched) == 1


def test_follower_chain_replay_fits_in_async_rounds():
    inst = Instance([(x, 0) for x in range(6)], [(0, 1), (0, 2), (0, 3)])
    trace = run_async(inst, ActivationSequence(seed=0))
    sched = build_greedy_forest_schedule(trace)
    assert len(sched) - 1 <= len(trace.rounds)
    assert validate_parallel_schedule(sched) == []


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 2), st.integers(2, 24), st.integers(0, 10**6))
def test_greedy_schedules_are_valid_and_complete(radius, n, seed):
    trace = _trace(n, seed, radius)
    sched = build_greedy_forest_schedule(trace)
    assert validate_parallel_schedule(sched) == []
    final = {pid: (p.head, p.tail) for pid, p in trace.final.particles.items()}
    assert {pid: (s.head, s.tail) for pid, s in sched.configurations[-1].items()} == final
    assert sched.moves_done[-1] == {pid: len(m) for pid, m in trace.movement_sequences().items()}


def test_complaint_schedule_respects_capacity_when_it_completes():
    done = 0
    for seed in range(20):
        trace = _trace(14, seed, 1)
        try:
            sched = build_greedy_forest_schedule(trace, Mode.COMPLAINT)
        except IncompatibleTrace:
            continue
        done += 1
        assert validate_parallel_schedule(sched) == []
    assert done > 0


def test_dominance_trivial_at_step_zero():
    trace = _trace(12, 1)
    sched = build_greedy_forest_schedule(trace)
    bad = check_dominance(trace, sched)
    assert bad is None or bad.step > 0


def _frozen(sched, pid, done):
    """Pretend ``pid`` has made ``done`` moves from step 1 on."""
    moves = [sched.moves_done[0]] + [{**m, pid: done} for m in sched.moves_done[1:]]
    return ParallelSchedule(sched.object, sched.configurations, sched.mode, moves)


def test_overeager_schedule_is_caught():
    trace = _trace(12, 3)
    sched = build_greedy_forest_schedule(trace)
    seqs = trace.movement_sequences()
    pid = max(seqs, key=lambda p: len(seqs[p]))
    bad = check_dominance(trace, _frozen(sched, pid, len(seqs[pid])))
    assert bad is not None and bad.step >= 1


def test_lazy_particle_never_blamed():
    trace = _trace(12, 3)
    sched = build_greedy_forest_schedule(trace)
    seqs = trace.movement_sequences()
    pid = max(seqs, key=lambda p: len(seqs[p]))
    bad = check_dominance(trace, _frozen(sched, pid, 0))
    assert bad is None or bad.particle != pid


def test_head_tail_distance():
    assert head_tail_distance(0, 0) == (0, 0)
    assert head_tail_distance(4, 0) == (2, 2)
    assert head_tail_distance(4, 1) == (1, 2)
    assert head_tail_distance(4, 4) == (0, 0)
    assert head_tail_distance(3, 3) == (0, 1)  # ends expanded


def test_path_of_follows_expansions():
    trace = _trace(12, 2)
    for pid, seq in trace.movement_sequences().items():
        walk = path_of(trace, pid)
        exps = [m for _, m in seq if m.kind in (MoveKind.SOLE_EXPANSION, MoveKind.HANDOVER_EXPANSION)]
        assert len(walk) == len(exps) + 1
        assert walk[-1] == trace.final.particles[pid].head


def test_expanded_parent_precondition():
    bad_c0 = {0: Slot(Node(2, 0), Node(1, 0)), 1: Slot(Node(1, 1), Node(2, 1), parent=Node(1, 0))}
    with pytest.raises(ValueError):
        check_expanded_parent_invariant(_sched(bad_c0))
    assert check_expanded_parent_invariant(_sched(bad_c0), require_pre=False) is not None


def test_all_contracted_start_passes_precondition():
    sched = build_greedy_forest_schedule(_trace(10, 0))
    check_expanded_parent_invariant(sched)  # must not raise


# -- forest-path executor -------------------------------------------------------------------------


@pytest.mark.parametrize("ell", [5, 9, 14])
def test_forest_path_bound_small_grid(ell):
    for k in range(1, ell + 1):
        for name, L, branches in all_fixtures(ell, k):
            run = run_forest_path(L, branches, k)
            assert run.filled_at is not None and run.filled_at <= 2 * (ell + k), (name, ell, k)
            sched = ParallelSchedule(frozenset(), run.configurations)
            assert validate_parallel_schedule(sched) == [], (name, ell, k)


def test_comb_fixture_guard():
    assert comb_ok(5, 3) and not comb_ok(5, 5)
    with pytest.raises(ValueError):
        comb(5, 5)
