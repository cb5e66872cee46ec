"""Rounds and rounds/MD against particle count on a radius-4 hexagon."""
import argparse

from unicoat.harness.experiment import ExperimentPlan, run_experiment

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--radius", type=int, default=4)
ap.add_argument("--ns", type=int, nargs="+", default=[32, 64, 128, 256])
ap.add_argument("--trials", type=int, default=20)
ap.add_argument("--seed-base", type=int, default=0)
ap.add_argument("--election", default="oracle", choices=["oracle", "randomized"])
ap.add_argument("--out", default="results/rounds_vs_n")
args = ap.parse_args()

plan = ExperimentPlan("hexagon", [args.radius], args.ns, args.trials, args.seed_base,
                      election=args.election)
res = run_experiment(plan)
for path in res.write(args.out, svg=True):
    print("wrote", path)
print(res.summary_csv(), end="")
means = [c.mean_rounds for c in res.cells]
for (a, b), (na, nb) in zip(zip(means, means[1:]), zip(args.ns, args.ns[1:])):
    print(f"rounds({nb}) / rounds({na}) = {b / a:.3f}")
