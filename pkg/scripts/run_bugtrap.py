"""Bug-trap comparison: Dijkstra vs Euclidean A* vs landmark A* on the shipped trap.

    python3 scripts/run_bugtrap.py --seed 0 --reps 5 --out results/bugtrap.csv
"""

import argparse
import statistics
from pathlib import Path

from lmprm.bench import ExperimentSpec, emit_report, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--reps", type=int, default=5)
    ap.add_argument("--k", type=int, default=100)
    ap.add_argument("--density", type=float, default=1000.0)
    ap.add_argument("--timing", action="store_true")
    ap.add_argument("--out", default="results/bugtrap.csv")
    args = ap.parse_args()

    spec = ExperimentSpec.desk("bugtrap", args.seed, repetitions=args.reps,
                               landmark_counts=(args.k,), density=args.density)
    records = run(spec)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    emit_report(records, args.out, include_timing=args.timing)

    print(f"{'rep':>4} {'n':>6} {'dijkstra':>9} {'euclid':>8} {'landmark':>9} {'ratio':>7}")
    for r in records:
        dj, eu, lm = (r.method(m).iterations
                      for m in ("dijkstra", "euclidean", f"landmark:{args.k}"))
        print(f"{r.query_idx:>4} {r.n:>6} {dj:>9} {eu:>8} {lm:>9} {dj / lm:>7.1f}")
    ratios = [r.iteration_ratio(f"landmark:{args.k}") for r in records]
    print(f"median dijkstra/landmark iteration ratio: {statistics.median(ratios):.1f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
