"""Landmark count x graph size sweep in one cluttered environment (P(clear) = 0.05).

Prints the median Dijkstra/landmark iteration ratio per (n, k) cell.

    python3 scripts/run_fraction_sweep.py --seed 1 --out results/fraction.csv
    python3 scripts/run_fraction_sweep.py --paper-scale ...   # 40k-80k vertices, 100 reps
"""

import argparse
import statistics
from collections import defaultdict
from pathlib import Path

from lmprm.bench import ExperimentSpec, emit_report, run


def ints(text):
    return tuple(int(float(v)) for v in text.split(","))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--sizes", type=ints)
    ap.add_argument("--ks", type=ints)
    ap.add_argument("--reps", type=int)
    ap.add_argument("--p-clear", type=float, default=0.05)
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--paper-scale", action="store_true")
    ap.add_argument("--timing", action="store_true")
    ap.add_argument("--out", default="results/fraction.csv")
    args = ap.parse_args()

    overrides = {"p_clear": (args.p_clear,), "threads": args.threads}
    if args.sizes:
        overrides["graph_sizes"] = args.sizes
    if args.ks:
        overrides["landmark_counts"] = args.ks
    if args.reps:
        overrides["repetitions"] = args.reps
    make = ExperimentSpec.paper if args.paper_scale else ExperimentSpec.desk
    spec = make("fraction_sweep", args.seed, **overrides)
    records = run(spec)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    emit_report(records, args.out, include_timing=args.timing)

    cells = defaultdict(list)
    for r in records:
        lm = r.methods[-1]
        cells[(r.n, lm.k)].append(r.iteration_ratio(lm.method))
    sizes = sorted({n for n, _ in cells})
    ks = sorted({k for _, k in cells})
    print("median dijkstra/landmark iteration ratio")
    print(f"{'k':>6}" + "".join(f"{'n=' + str(n):>12}" for n in sizes))
    for k in ks:
        print(f"{k:>6}" + "".join(f"{statistics.median(cells[(n, k)]):>12.2f}" for n in sizes))
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
