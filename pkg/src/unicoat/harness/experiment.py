"""Parameter sweeps: generate instances, run them, aggregate rounds and MD ratios."""
from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import asdict, dataclass, field
from pathlib import Path

from scipy import stats

from ..analysis import UNDEFINED, competitive_ratio_estimate, matching_dilation, ratio_anomaly
from ..coating import CoatingSettings
from ..scheduler import ActivationSequence, Policy, run_async
from .instances import (Instance, gen_gap_theorem1, gen_hexagon, gen_line_lemma1,
                        load_instance)

GENERATORS = ("hexagon", "line_lemma1", "gap_theorem1", "file")


@dataclass
class ExperimentPlan:
    generator: str = "hexagon"
    radii: list[int] = field(default_factory=lambda: [4])
    ns: list[int] = field(default_factory=lambda: [32, 64, 128, 256])
    trials: int = 20
    seed_base: int = 0
    policy: str = "permutation"
    election: str = "oracle"
    root_generates_flag: bool = True
    max_rounds_factor: int = 50
    files: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise ValueError(f"unknown generator {self.generator!r}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        Policy(self.policy)
        CoatingSettings(election=self.election)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        return cls(**d)

    def cells(self) -> list[tuple[int | None, int | None, str | None]]:
        if self.generator == "file":
            return [(None, None, f) for f in self.files]
        if self.generator == "hexagon":
            return [(r, n, None) for r in self.radii for n in self.ns]
        return [(None, n, None) for n in self.ns]

    def instance(self, radius, n, path, seed: int) -> Instance:
        if self.generator == "hexagon":
            return gen_hexagon(radius, n, seed)
        if self.generator == "line_lemma1":
            return gen_line_lemma1(n, seed)
        if self.generator == "gap_theorem1":
            return gen_gap_theorem1(n, seed)
        inst = load_instance(path)
        inst.seed = seed
        return inst


@dataclass
class TrialResult:
    instance_id: str
    seed: int
    n: int
    radius: int | None
    rounds: int | None
    md: int
    ratio: float | None
    layer_times: list[int]
    limit_exceeded: bool


@dataclass
class CellSummary:
    radius: int | None
    n: int
    trials: int
    completed: int
    limit_exceeded: int
    mean_rounds: float | None
    ci_low: float | None
    ci_high: float | None
    mean_ratio: float | None
    ratio_ci_low: float | None
    ratio_ci_high: float | None
    md_values: list[int]
    anomalies: int


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    trials: list[TrialResult]
    cells: list[CellSummary]

    def trials_csv(self) -> str:
        width = max((len(t.layer_times) for t in self.trials), default=0)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["instance_id", "seed", "n", "radius", "rounds", "md", "ratio"]
                   + [f"t_{i}" for i in range(1, width + 1)] + ["limit_exceeded"])
        for t in self.trials:
            times = t.layer_times + [""] * (width - len(t.layer_times))
            w.writerow([t.instance_id, t.seed, t.n, _blank(t.radius), _blank(t.rounds), t.md,
                        _fmt_ratio(t.ratio)] + times + [int(t.limit_exceeded)])
        return buf.getvalue()

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["radius", "n", "trials", "completed", "limit_exceeded", "mean_rounds",
                    "ci95_low", "ci95_high", "mean_ratio", "ratio_ci95_low", "ratio_ci95_high",
                    "md_min", "md_max", "anomalies"])
        for c in self.cells:
            w.writerow([_blank(c.radius), c.n, c.trials, c.completed, c.limit_exceeded,
                        _num(c.mean_rounds), _num(c.ci_low), _num(c.ci_high),
                        _num(c.mean_ratio), _num(c.ratio_ci_low), _num(c.ratio_ci_high),
                        min(c.md_values), max(c.md_values), c.anomalies])
        return buf.getvalue()

    def write(self, out_dir, svg: bool = False) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = [out / "trials.csv", out / "summary.csv"]
        written[0].write_text(self.trials_csv(), encoding="utf-8")
        written[1].write_text(self.summary_csv(), encoding="utf-8")
        if svg:
            from .svg import experiment_charts
            for name, text in experiment_charts(self).items():
                path = out / name
                path.write_text(text, encoding="utf-8")
                written.append(path)
        return written


def _blank(x) -> str:
    return "" if x is None else str(x)


def _num(x) -> str:
    return "" if x is None else f"{x:.6g}"


def _fmt_ratio(r) -> str:
    if r is None:
        return ""
    if r == UNDEFINED:
        return "inf"
    return f"{float(r):.6g}"


def mean_ci(values: list[float], level: float = 0.95) -> tuple[float | None, float | None, float | None]:
    """Sample mean and Student-t confidence interval; no interval from one sample."""
    if not values:
        return None, None, None
    m = statistics.fmean(values)
    if len(values) < 2:
        return m, None, None
    sem = statistics.stdev(values) / math.sqrt(len(values))
    if sem == 0:
        return m, m, m
    lo, hi = stats.t.interval(level, len(values) - 1, loc=m, scale=sem)
    return m, float(lo), float(hi)


def run_trial(plan: ExperimentPlan, radius, n, path, trial: int) -> TrialResult:
    seed = plan.seed_base + trial
    inst = plan.instance(radius, n, path, seed)
    settings = CoatingSettings(election=plan.election,
                               root_generates_flag=plan.root_generates_flag)
    trace = run_async(inst, ActivationSequence(seed=seed, policy=plan.policy),
                      limit=plan.max_rounds_factor * inst.n, settings=settings, record="none")
    md = matching_dilation(inst)
    if trace.quiesced:
        rounds = trace.rounds_to_quiescence
        ratio = competitive_ratio_estimate(rounds, md)
        times = [trace.layer_times[i] for i in sorted(trace.layer_times)]
    else:
        rounds, ratio, times = None, None, []
    iid = f"{plan.generator}-r{radius}-n{inst.n}-s{seed}" if radius is not None \
        else f"{plan.generator}-n{inst.n}-s{seed}"
    return TrialResult(iid, seed, inst.n, radius, rounds, md.value,
                       None if ratio is None else (ratio if ratio == UNDEFINED else float(ratio)),
                       times, not trace.quiesced)


def run_experiment(plan: ExperimentPlan) -> ExperimentResult:
    trials: list[TrialResult] = []
    cells: list[CellSummary] = []
    for radius, n, path in plan.cells():
        rows = [run_trial(plan, radius, n, path, t) for t in range(plan.trials)]
        trials.extend(rows)
        done = [r for r in rows if not r.limit_exceeded]
        m, lo, hi = mean_ci([r.rounds for r in done])
        finite = [r.ratio for r in done if r.ratio is not None and r.ratio != UNDEFINED]
        rm, rlo, rhi = mean_ci(finite)
        cells.append(CellSummary(
            radius, rows[0].n, len(rows), len(done), len(rows) - len(done), m, lo, hi,
            rm, rlo, rhi, sorted({r.md for r in rows}),
            sum(1 for r in done if r.ratio is not None and ratio_anomaly(r.ratio))))
    return ExperimentResult(plan, trials, cells)


def plan_to_dict(plan: ExperimentPlan) -> dict:
    return asdict(plan)
