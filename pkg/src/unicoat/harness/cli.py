"""Command line entry point: ``unicoat {generate,run,experiment,validate,md,check}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from ..analysis import Infeasible, UNDEFINED, competitive_ratio_estimate, is_legal, matching_dilation
from ..coating import CoatingSettings
from ..scheduler import (ActivationSequence, IncompatibleTrace, InvariantViolation, Mode,
                         build_greedy_forest_schedule, check_dominance,
                         check_expanded_parent_invariant, run_async)
from .experiment import ExperimentPlan, run_experiment
from .instances import (Instance, gen_gap_theorem1, gen_hexagon, gen_line_lemma1,
                        load_instance, validate_instance)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_ROUND_LIMIT = 3
EXIT_INVARIANT = 4

BOUND_NOTE = "lower bound, not OPT"


def _ratio_text(ratio) -> str:
    return "undefined (MD = 0)" if ratio == UNDEFINED else f"{float(ratio):.4f}"


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="scheduler / port-offset seed")
    p.add_argument("--scheduler", default="permutation", choices=["permutation", "uniform"])
    p.add_argument("--election", default="oracle", choices=["oracle", "randomized"])
    p.add_argument("--max-rounds", type=int, default=None, help="round limit (default 50n)")
    p.add_argument("--no-root-flags", action="store_true",
                   help="roots do not create a complaint flag when idle neighbors join")


def _settings(args) -> CoatingSettings:
    return CoatingSettings(election=args.election, root_generates_flag=not args.no_root_flags)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_generate(args) -> int:
    if args.generator == "hexagon":
        inst = gen_hexagon(args.radius, args.n, args.seed)
    elif args.generator == "line_lemma1":
        inst = gen_line_lemma1(args.n, args.seed)
    else:
        inst = gen_gap_theorem1(args.n, args.seed)
    _emit(inst.dumps(), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    rep = validate_instance(load_instance(args.instance), strict=args.strict)
    for v in rep.violations:
        print(f"violation: {v}")
    for u in rep.unchecked:
        print(f"unchecked: {u}")
    print("ok" if rep.ok else "invalid")
    return EXIT_OK if rep.ok else EXIT_VALIDATION


def cmd_md(args) -> int:
    inst = load_instance(args.instance)
    try:
        res = matching_dilation(inst)
    except Infeasible as e:
        print(f"infeasible: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.emit == "json":
        _emit(json.dumps({"md": res.value, "note": BOUND_NOTE,
                          "witness": {str(k): list(v) for k, v in sorted(res.witness.items())}},
                         sort_keys=True) + "\n", args.out)
    else:
        print(f"MD = {res.value} ({BOUND_NOTE})")
    return EXIT_OK


def cmd_run(args) -> int:
    inst = load_instance(args.instance)
    rep = validate_instance(inst, strict=args.strict)
    if not rep.ok:
        for v in rep.violations:
            print(f"violation: {v}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        trace = run_async(inst, ActivationSequence(seed=args.seed, policy=args.scheduler),
                          limit=args.max_rounds, settings=_settings(args),
                          record="full" if args.emit == "json" else "none",
                          check_invariants=args.check_invariants)
    except InvariantViolation as e:
        print(f"invariant violation: {e}", file=sys.stderr)
        return EXIT_INVARIANT
    md = matching_dilation(inst).value
    if args.emit == "json":
        _emit(trace.dumps(), args.out)
    elif args.emit == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        times = [trace.layer_times[i] for i in sorted(trace.layer_times)]
        w.writerow(["n", "seed", "rounds", "md", "ratio"]
                   + [f"t_{i}" for i in range(1, len(times) + 1)] + ["limit_exceeded"])
        r = trace.rounds_to_quiescence
        ratio = "" if r is None else _ratio_text(competitive_ratio_estimate(r, md))
        w.writerow([inst.n, args.seed, "" if r is None else r, md, ratio] + times
                   + [int(not trace.quiesced)])
        _emit(buf.getvalue(), args.out)
    if not trace.quiesced:
        print(f"round limit {trace.limit} exceeded", file=sys.stderr)
        return EXIT_ROUND_LIMIT
    if args.emit is None or args.out:
        r = trace.rounds_to_quiescence
        print(f"n = {inst.n}  rounds = {r}  MD = {md}  "
              f"ratio = {_ratio_text(competitive_ratio_estimate(r, md))} ({BOUND_NOTE})  "
              f"legal = {is_legal(trace.final)}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    plan = ExperimentPlan.from_dict(json.loads(Path(args.plan).read_text(encoding="utf-8")))
    if args.max_rounds is not None:
        plan.max_rounds_factor = max(1, args.max_rounds)
    res = run_experiment(plan)
    if args.out:
        for path in res.write(args.out, svg=args.emit == "svg"):
            print(path)
    else:
        sys.stdout.write(res.summary_csv())
    skipped = sum(c.limit_exceeded for c in res.cells)
    anomalies = sum(c.anomalies for c in res.cells)
    print(f"trials: {len(res.trials)}  round-limit exceeded: {skipped}  "
          f"MD anomalies: {anomalies}  (ratio uses MD, a {BOUND_NOTE})", file=sys.stderr)
    if skipped and args.strict:
        return EXIT_ROUND_LIMIT
    return EXIT_OK


def _trace_from_header(header: dict):
    inst = Instance.from_json(header["instance"])
    s = header["settings"]
    settings = CoatingSettings(s["election"], s["root_generates_flag"], s["flag_capacity"])
    offsets = [header["offsets"][str(i)] for i in range(inst.n)]
    return run_async(inst, ActivationSequence(seed=header["seed"], policy=header["policy"]),
                     limit=header.get("limit"), settings=settings, offsets=offsets,
                     check_invariants=True)


def cmd_check(args) -> int:
    """Replay a recorded trace under invariant checks, then run the dominance suites."""
    text = Path(args.trace).read_text(encoding="utf-8")
    header = json.loads(text.splitlines()[0])
    try:
        trace = _trace_from_header(header)
    except InvariantViolation as e:
        print(f"invariant violation: {e}")
        return EXIT_INVARIANT
    if trace.dumps() != text:
        print("replay differs from the recorded trace")
        return EXIT_INVARIANT
    print("replay: identical, invariants hold")
    failed = False
    for mode in (Mode.PARALLEL, Mode.COMPLAINT):
        try:
            sched = build_greedy_forest_schedule(trace, mode)
        except IncompatibleTrace as e:
            print(f"{mode.value}: greedy replay stuck: {e}")
            failed = True
            continue
        dom = check_dominance(trace, sched)
        try:
            par = check_expanded_parent_invariant(sched)
        except ValueError as e:
            par = e
        print(f"{mode.value}: {len(sched)} steps; dominance "
              f"{'ok' if dom is None else dom}; expanded parents {'ok' if par is None else par}")
        failed |= dom is not None or par is not None
    return EXIT_VALIDATION if failed and args.strict else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="unicoat", description="Universal coating simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a generated instance as JSON")
    g.add_argument("generator", choices=["hexagon", "line_lemma1", "gap_theorem1"])
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--radius", type=int, default=4)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    r = sub.add_parser("run", help="simulate one instance")
    r.add_argument("instance")
    _common(r)
    r.add_argument("--emit", choices=["csv", "json"], default=None)
    r.add_argument("--out")
    r.add_argument("--strict", action="store_true", help="also check the tunnel-width property")
    r.add_argument("--check-invariants", action="store_true")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("experiment", help="run a JSON experiment plan")
    e.add_argument("plan")
    e.add_argument("--out", help="output directory for trials.csv, summary.csv and charts")
    e.add_argument("--emit", choices=["csv", "svg"], default="csv")
    e.add_argument("--max-rounds", type=int, default=None, help="round limit factor (limit = factor * n)")
    e.add_argument("--strict", action="store_true", help="exit 3 if any trial hits the round limit")
    e.set_defaults(func=cmd_experiment)

    v = sub.add_parser("validate", help="check instance validity")
    v.add_argument("instance")
    v.add_argument("--strict", action="store_true")
    v.set_defaults(func=cmd_validate)

    m = sub.add_parser("md", help="matching dilation of an instance")
    m.add_argument("instance")
    m.add_argument("--emit", choices=["json"], default=None)
    m.add_argument("--out")
    m.set_defaults(func=cmd_md)

    c = sub.add_parser("check", help="replay a trace and run dominance/invariant suites")
    c.add_argument("trace")
    c.add_argument("--strict", action="store_true", help="exit 2 when a suite reports a violation")
    c.set_defaults(func=cmd_check)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
