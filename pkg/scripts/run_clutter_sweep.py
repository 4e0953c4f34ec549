"""Clutter sweep: iteration ratios against Dijkstra across calibrated P(clear) levels.

    python3 scripts/run_clutter_sweep.py --seed 2 --out results/clutter.csv
    python3 scripts/run_clutter_sweep.py --paper-scale ...   # 20 levels, 100 envs x 100 queries
"""

import argparse
from pathlib import Path

from lmprm.bench import ExperimentSpec, emit_report, run


def numbers(cast):
    return lambda text: tuple(cast(float(v)) for v in text.split(","))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=2)
    ap.add_argument("--p-clear", type=numbers(float))
    ap.add_argument("--ks", type=numbers(int))
    ap.add_argument("--envs", type=int)
    ap.add_argument("--queries", type=int)
    ap.add_argument("--density", type=float)
    ap.add_argument("--objectives", default="length")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--paper-scale", action="store_true")
    ap.add_argument("--timing", action="store_true")
    ap.add_argument("--out", default="results/clutter.csv")
    args = ap.parse_args()

    overrides = {"threads": args.threads, "objective_ids": tuple(args.objectives.split(","))}
    for key, val in (("p_clear", args.p_clear), ("landmark_counts", args.ks),
                     ("environments", args.envs), ("queries", args.queries),
                     ("density", args.density)):
        if val:
            overrides[key] = val
    make = ExperimentSpec.paper if args.paper_scale else ExperimentSpec.desk
    spec = make("clutter_sweep", args.seed, **overrides)
    records = run(spec)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    summary = emit_report(records, args.out, include_timing=args.timing)

    print(f"{'scenario':<22} {'P(clear)':>9} {'method':<14} {'queries':>7} {'median ratio':>13}")
    for row in summary:
        if row["method"] == "dijkstra":
            continue
        print(f"{row['scenario']:<22} {row['p_clear']:>9.4f} {row['method']:<14} "
              f"{row['queries']:>7} {row['median_dijkstra_ratio']:>13.2f}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
