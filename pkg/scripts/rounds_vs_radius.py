"""Rounds against object radius for a few fixed particle counts."""
import argparse

from unicoat.harness.experiment import ExperimentPlan, run_experiment

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--radii", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
ap.add_argument("--ns", type=int, nargs="+", default=[64, 128])
ap.add_argument("--trials", type=int, default=20)
ap.add_argument("--seed-base", type=int, default=0)
ap.add_argument("--out", default="results/rounds_vs_radius")
args = ap.parse_args()

res = run_experiment(ExperimentPlan("hexagon", args.radii, args.ns, args.trials, args.seed_base))
for path in res.write(args.out, svg=True):
    print("wrote", path)
print(res.summary_csv(), end="")
