"""Gap instance: MD stays put while rounds to quiescence keep growing with n."""
import argparse

from unicoat.harness.experiment import ExperimentPlan, run_experiment

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--ns", type=int, nargs="+", default=[12, 20, 28, 36, 44, 60, 92])
ap.add_argument("--trials", type=int, default=20)
ap.add_argument("--out", default="results/gap_instance")
args = ap.parse_args()

res = run_experiment(ExperimentPlan("gap_theorem1", ns=args.ns, trials=args.trials))
res.write(args.out, svg=True)
for c in res.cells:
    print(f"n={c.n:4d}  MD={c.md_values}  mean rounds={c.mean_rounds:.2f}  "
          f"ratio={c.mean_ratio:.2f} (lower bound, not OPT)")
