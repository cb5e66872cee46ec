"""Chain hanging off a line object: the far end needs at least n rounds."""
import argparse

from unicoat.harness.instances import gen_line_lemma1
from unicoat.scheduler import ActivationSequence, run_async

ap = argparse.ArgumentParser(description=__doc__)
ap.add_argument("--ns", type=int, nargs="+", default=[8, 16, 32, 64])
ap.add_argument("--seeds", type=int, default=20)
args = ap.parse_args()

for n in args.ns:
    inst = gen_line_lemma1(n)
    rounds = [run_async(inst, ActivationSequence(seed=s), record="none").rounds_to_quiescence
              for s in range(args.seeds)]
    print(f"n={n:3d}  min rounds={min(rounds)}  max rounds={max(rounds)}  floor ok={min(rounds) >= n}")
