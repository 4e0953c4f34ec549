"""``lmprm`` command line: gen-env, build, landmarks, query, bench, validate.

Exit codes: 0 ok, 1 usage/other error, 2 no solution, 3 validation failure,
4 file format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from . import audit, bench
from .env import (ClutterSpec, calibrate_intensity, load_env, poisson_forest, save_env,
                  segment_clear)
from .errors import CalibrationError, FingerprintMismatch, FormatError, SamplingError
from .landmarks import (build_landmark_table, landmark_heuristic, load_table, save_table,
                        select_landmarks)
from .roadmap import build_prm, get_objective, load_graph, nearest_vertex, save_graph
from .search import SearchWorkspace, astar, euclidean_heuristic

EXIT_OK, EXIT_ERROR, EXIT_NO_SOLUTION, EXIT_VALIDATION, EXIT_FORMAT = 0, 1, 2, 3, 4

log = logging.getLogger("lmprm")


def _seed(args) -> int:
    """Explicit --seed, or a fresh one that is printed so the run can be repeated."""
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}")
    return args.seed


def _threads(args) -> int:
    if args.threads is not None:
        return max(1, args.threads)
    return max(1, int(os.environ.get("LMPRM_THREADS", "1")))


def _point(text: str) -> np.ndarray:
    return np.array([float(v) for v in text.split(",")])


def _ints(text: str) -> tuple:
    return tuple(int(float(v)) for v in text.split(",") if v)


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v)


# --------------------------------------------------------------------------


def cmd_gen_env(args) -> int:
    seed = _seed(args)
    rng = np.random.default_rng(seed)
    if args.p_clear is not None:
        spec = ClutterSpec(args.p_clear, args.obstacle_radius, args.mc_pairs, args.tolerance)
        lam = calibrate_intensity(spec, rng, dim=args.dim)
    else:
        lam = args.intensity
    env = poisson_forest(lam, args.obstacle_radius, rng, dim=args.dim,
                         mu_samples=args.mu_samples, seed=seed)
    save_env(env, args.out)
    print(f"intensity: {lam!r}\nobstacles: {len(env.obstacles)}\n"
          f"mu_free_estimate: {env.mu_free_estimate!r}\nwrote {args.out}")
    return EXIT_OK


def cmd_build(args) -> int:
    seed = _seed(args)
    env = load_env(args.env)
    if args.n is not None:
        n = args.n
    else:
        n = max(2, int(round(args.density * env.mu_free)))
    objectives = [get_objective(o) for o in args.objectives.split(",")]
    t0 = time.perf_counter()
    graph = build_prm(env, n, objectives, seed=seed, threads=_threads(args))
    elapsed = time.perf_counter() - t0
    save_graph(graph, args.out)
    print(f"vertices: {graph.n}\ndirected_edges: {graph.m}\n"
          f"radius: {graph.connection_radius!r}\nbuild_time_s: {elapsed:.3f}\nwrote {args.out}")
    return EXIT_OK


def cmd_landmarks(args) -> int:
    seed = _seed(args)
    graph = load_graph(args.graph)
    k = min(args.k, graph.n)
    ids = select_landmarks(graph, k, np.random.default_rng(seed)) if k > 0 else []
    table = build_landmark_table(graph, args.objective, ids, seed=seed, threads=_threads(args))
    save_table(table, args.out)
    size = Path(args.out).stat().st_size
    print(f"landmarks: {table.k}\npreprocess_time_s: {table.build_time:.4f}\n"
          f"table_bytes: {size}\nsymmetric: {table.symmetric}\nwrote {args.out}")
    return EXIT_OK


def cmd_query(args) -> int:
    graph = load_graph(args.graph)
    objective = args.objective
    s = nearest_vertex(graph, _point(args.start))
    g = nearest_vertex(graph, _point(args.goal))
    if args.strict_snap:
        if not args.env:
            print("--strict-snap needs --env", file=sys.stderr)
            return EXIT_ERROR
        env = load_env(args.env)
        for p, v in ((args.start, s), (args.goal, g)):
            if not segment_clear(env, _point(p), graph.vertices[v]):
                print(f"snap of {p} to vertex {v} collides", file=sys.stderr)
                return EXIT_NO_SOLUTION
    if args.method == "landmark":
        if not args.table:
            print("--method landmark needs --table", file=sys.stderr)
            return EXIT_ERROR
        table = load_table(args.table, graph)
        objective = table.objective_id
        h = landmark_heuristic(table, g, graph)
    elif args.method == "euclidean":
        h = euclidean_heuristic(graph)
    else:
        h = None
    ws = SearchWorkspace(graph.n)
    runs = [astar(graph, objective, s, g, h, ws) for _ in range(max(1, args.repeat))]
    res = runs[0]
    wall = float(np.median([r.wall_time for r in runs]))
    payload = {
        "status": res.status,
        "start_vertex": s,
        "goal_vertex": g,
        "method": args.method,
        "objective": objective,
        "cost": res.cost if res.found else None,
        "iterations": res.iterations,
        "pushes": res.pushes,
        "wall_time_us": int(round(wall * 1e6)),
        "path": res.path,
    }
    if args.json:
        print(json.dumps(payload))
    else:
        for key in ("status", "method", "objective", "cost", "iterations", "pushes",
                    "wall_time_us"):
            print(f"{key}: {payload[key]}")
        print("path: " + " ".join(str(v) for v in res.path))
    return EXIT_OK if res.found else EXIT_NO_SOLUTION


def cmd_bench(args) -> int:
    seed = _seed(args)
    scenario = {"bugtrap": "bugtrap", "fraction": "fraction_sweep",
                "clutter": "clutter_sweep"}[args.scenario]
    overrides = {"threads": _threads(args)}
    if args.sizes:
        overrides["graph_sizes"] = _ints(args.sizes)
    if args.ks:
        overrides["landmark_counts"] = _ints(args.ks)
    if args.reps:
        overrides["repetitions"] = args.reps
    if args.queries:
        overrides["queries"] = args.queries
    if args.envs:
        overrides["environments"] = args.envs
    if args.p_clear:
        overrides["p_clear"] = _floats(args.p_clear)
    if args.density:
        overrides["density"] = args.density
    if args.objectives:
        overrides["objective_ids"] = tuple(args.objectives.split(","))
    if args.mc_pairs:
        overrides["mc_pairs"] = args.mc_pairs
    if args.env:
        overrides["env_path"] = args.env
    make = bench.ExperimentSpec.paper if args.paper_scale else bench.ExperimentSpec.desk
    spec = make(scenario, seed, **overrides)
    t0 = time.perf_counter()
    records = bench.run(spec)
    summary = bench.emit_report(records, args.out, include_timing=args.timing)
    print(f"records: {len(records)}\nrows: {sum(len(r.methods) for r in records)}\n"
          f"elapsed_s: {time.perf_counter() - t0:.1f}\nwrote {args.out}")
    for row in summary:
        if row["method"] != "dijkstra":
            print(f"  p_clear={row['p_clear']} n={row['n']} {row['method']}: median "
                  f"dijkstra/method iterations {row['median_dijkstra_ratio']:.2f}")
    return EXIT_OK


def cmd_validate(args) -> int:
    seed = _seed(args)
    graph = load_graph(args.graph)
    env = load_env(args.env) if args.env else None
    table = None
    if args.table:
        table = load_table(args.table)
    results = audit.run_all(graph, table, env, seed)
    for r in results:
        print(r.line())
    ok = all(r.ok for r in results)
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_VALIDATION


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--log-level", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="lmprm", description=__doc__.splitlines()[0],
                                parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("gen-env", parents=[common], help="sample a Poisson-forest environment")
    grp = s.add_mutually_exclusive_group(required=True)
    grp.add_argument("--p-clear", type=float)
    grp.add_argument("--lambda", dest="intensity", type=float)
    s.add_argument("--obstacle-radius", type=float, default=0.05)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--mc-pairs", type=int, default=100_000)
    s.add_argument("--tolerance", type=float, default=0.005)
    s.add_argument("--mu-samples", type=int, default=100_000)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_gen_env)

    s = sub.add_parser("build", parents=[common], help="build a PRM* graph")
    s.add_argument("--env", required=True)
    grp = s.add_mutually_exclusive_group(required=True)
    grp.add_argument("--n", type=int)
    grp.add_argument("--density", type=float)
    s.add_argument("--objectives", default="length")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_build)

    s = sub.add_parser("landmarks", parents=[common], help="build a landmark table")
    s.add_argument("--graph", required=True)
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--objective", default="length")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_landmarks)

    s = sub.add_parser("query", parents=[common], help="answer one start/goal query")
    s.add_argument("--graph", required=True)
    s.add_argument("--start", required=True)
    s.add_argument("--goal", required=True)
    s.add_argument("--method", choices=("dijkstra", "euclidean", "landmark"), default="dijkstra")
    s.add_argument("--table")
    s.add_argument("--objective", default="length")
    s.add_argument("--repeat", type=int, default=1)
    s.add_argument("--json", action="store_true")
    s.add_argument("--strict-snap", action="store_true")
    s.add_argument("--env")
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("bench", parents=[common], help="run a benchmark scenario")
    s.add_argument("--scenario", choices=("bugtrap", "fraction", "clutter"), required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--paper-scale", action="store_true")
    s.add_argument("--timing", action="store_true",
                   help="fill the wall-time columns (the CSV is then no longer reproducible)")
    s.add_argument("--sizes")
    s.add_argument("--ks")
    s.add_argument("--reps", type=int)
    s.add_argument("--queries", type=int)
    s.add_argument("--envs", type=int)
    s.add_argument("--p-clear")
    s.add_argument("--density", type=float)
    s.add_argument("--objectives")
    s.add_argument("--mc-pairs", type=int)
    s.add_argument("--env")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("validate", parents=[common], help="audit a graph (and table)")
    s.add_argument("--graph", required=True)
    s.add_argument("--table")
    s.add_argument("--env")
    s.set_defaults(func=cmd_validate)
    return p


_POINT_FLAGS = ("--start", "--goal")


def _join_point_args(argv):
    # "--start -0.3,0.2" would otherwise be read as an unknown flag
    out = []
    it = iter(argv)
    for tok in it:
        if tok in _POINT_FLAGS:
            nxt = next(it, None)
            out.append(tok if nxt is None else f"{tok}={nxt}")
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    args = build_parser().parse_args(_join_point_args(argv))
    for name, default in (("seed", None), ("threads", None), ("log_level", "WARNING")):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (FormatError, FingerprintMismatch) as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (CalibrationError, SamplingError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
