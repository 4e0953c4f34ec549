"""Experiment harness: bug trap, landmark-fraction sweep and clutter sweep.

Seeds: every random stream is derived from the master seed with
``derive_seed(master, tag, *cell_key)`` (numpy SeedSequence spawn keys), so a
single cell can be rebuilt from the seeds recorded in its CSV rows.
"""

from __future__ import annotations

import csv
import json
import logging
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .env import ClutterSpec, calibrate_intensity, env_from_dict, load_env, poisson_forest
from .landmarks import build_landmark_table, landmark_heuristic, select_landmarks
from .roadmap import RoadmapGraph, build_prm, get_objective, nearest_vertex
from .search import SearchWorkspace, astar, dijkstra, euclidean_heuristic

log = logging.getLogger(__name__)

TAG_ENV, TAG_GRAPH, TAG_TABLE, TAG_QUERY, TAG_CALIB = 1, 2, 3, 4, 5

CSV_COLUMNS = (
    "scenario", "p_clear", "lambda", "env_seed", "n", "graph_seed", "k", "table_seed",
    "query_idx", "query_seed", "method", "iterations", "pushes", "cost", "wall_time_us",
    "preprocess_time_us", "resamples", "status",
)

COST_RTOL = 1e-9


class HarnessError(AssertionError):
    """Methods disagreed on an optimal cost."""


def derive_seed(master: int, *key: int) -> int:
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass
class ExperimentSpec:
    scenario: str
    p_clear: tuple = (0.05,)
    obstacle_radius: float = 0.05
    env_path: str | None = None
    graph_sizes: tuple = ()
    density: float | None = None
    landmark_counts: tuple = (100,)
    queries: int = 1
    repetitions: int = 1
    environments: int = 1
    objective_ids: tuple = ("length",)
    master_seed: int = 0
    mc_pairs: int = 100_000
    threads: int = 1

    def __post_init__(self):
        if self.scenario not in ("bugtrap", "fraction_sweep", "clutter_sweep", "custom"):
            raise ValueError(f"unknown scenario {self.scenario!r}")
        for name in ("queries", "repetitions", "environments"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if any(k < 1 for k in self.landmark_counts) or any(n < 2 for n in self.graph_sizes):
            raise ValueError("landmark counts must be >= 1 and graph sizes >= 2")

    @classmethod
    def desk(cls, scenario: str, seed: int = 0, **overrides) -> "ExperimentSpec":
        base = {
            "bugtrap": dict(density=1000.0, landmark_counts=(100,), repetitions=1),
            "fraction_sweep": dict(p_clear=(0.05,), graph_sizes=(10_000, 20_000, 40_000),
                                   landmark_counts=(10, 30, 50, 70, 90, 110, 130),
                                   repetitions=10),
            "clutter_sweep": dict(p_clear=tuple(float(p) for p in np.geomspace(0.02, 1.0, 5)),
                                  environments=5, queries=20, density=20_000.0,
                                  landmark_counts=(10, 50, 90, 130, 170)),
        }[scenario]
        base.update(overrides)
        return cls(scenario=scenario, master_seed=seed, **base)

    @classmethod
    def paper(cls, scenario: str, seed: int = 0, **overrides) -> "ExperimentSpec":
        base = {
            "bugtrap": dict(density=1000.0, landmark_counts=(100,), repetitions=1),
            "fraction_sweep": dict(p_clear=(0.05,), graph_sizes=(40_000, 60_000, 80_000),
                                   landmark_counts=(10, 30, 50, 70, 90, 110, 130),
                                   repetitions=100),
            "clutter_sweep": dict(p_clear=tuple(float(p) for p in np.geomspace(0.01, 1.0, 20)),
                                  environments=100, queries=100, density=100_000.0,
                                  landmark_counts=(10, 30, 50, 70, 90, 110, 130, 150, 170)),
        }[scenario]
        base.update(overrides)
        return cls(scenario=scenario, master_seed=seed, **base)


@dataclass
class MethodResult:
    method: str
    iterations: int
    pushes: int
    cost: float
    wall_time: float
    status: str
    k: int | None = None
    table_seed: int | None = None
    preprocess_time: float | None = None


@dataclass
class ExperimentRecord:
    scenario: str
    objective_id: str
    n: int
    graph_seed: int
    query_idx: int
    query_seed: int | None
    start: int
    goal: int
    resamples: int
    p_clear: float | None = None
    lam: float | None = None
    env_seed: int | None = None
    methods: list = field(default_factory=list)

    def method(self, name: str) -> MethodResult:
        for m in self.methods:
            if m.method == name:
                return m
        raise KeyError(name)

    def iteration_ratio(self, name: str) -> float:
        """Dijkstra iterations divided by the named method's iterations."""
        return self.method("dijkstra").iterations / self.method(name).iterations


# --------------------------------------------------------------------------
# building blocks


def components(graph: RoadmapGraph) -> np.ndarray:
    adj = csr_matrix((np.ones(graph.m, np.int8), graph.neighbors, graph.offsets),
                     shape=(graph.n, graph.n))
    return connected_components(adj, directed=False)[1]


def sample_connected_query(comp: np.ndarray, rng: np.random.Generator):
    """Distinct vertex pair in one component; returns (start, goal, resamples)."""
    if np.bincount(comp).max() < 2:
        raise ValueError("no component has two vertices")
    resamples = 0
    while True:
        s, g = (int(v) for v in rng.integers(len(comp), size=2))
        if s != g and comp[s] == comp[g]:
            return s, g, resamples
        resamples += 1


def _build_tables(graph, objective_id, ks, seed_of, threads=1):
    tables = []
    for k in ks:
        seed = seed_of(k)
        ids = select_landmarks(graph, min(k, graph.n), np.random.default_rng(seed))
        tables.append((k, seed, build_landmark_table(graph, objective_id, ids, seed, threads)))
    return tables


def run_methods(graph: RoadmapGraph, objective_id: str, start: int, goal: int, tables,
                ws: SearchWorkspace | None = None) -> list[MethodResult]:
    """Dijkstra, Euclidean A* and landmark A* (one per table) on one query; costs must agree."""
    ws = ws or SearchWorkspace(graph.n)
    out = []
    res = dijkstra(graph, objective_id, start, goal, ws)
    out.append(MethodResult("dijkstra", res.iterations, res.pushes, res.cost, res.wall_time,
                            res.status))
    res = astar(graph, objective_id, start, goal, euclidean_heuristic(graph), ws)
    out.append(MethodResult("euclidean", res.iterations, res.pushes, res.cost, res.wall_time,
                            res.status))
    for k, seed, table in tables:
        res = astar(graph, objective_id, start, goal, landmark_heuristic(table, goal), ws)
        out.append(MethodResult(f"landmark:{k}", res.iterations, res.pushes, res.cost,
                                res.wall_time, res.status, k, seed, table.build_time))
    ref = out[0].cost
    for m in out[1:]:
        same = (m.cost == ref) or abs(m.cost - ref) <= COST_RTOL * max(abs(ref), 1e-300)
        if not same:
            raise HarnessError(f"{m.method} cost {m.cost!r} != dijkstra {ref!r} "
                               f"on query {start}->{goal}")
    return out


def _map(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(fn, items))


def _objectives(spec):
    return [get_objective(o) for o in spec.objective_ids]


def _graph_size(spec, env, default_density=None):
    if spec.graph_sizes:
        return int(spec.graph_sizes[0])
    density = spec.density or default_density
    return max(2, int(round(density * env.mu_free)))


def clutter_environment(p_clear: float, obstacle_radius: float, master: int, p_idx: int,
                        env_idx: int, mc_pairs: int = 100_000):
    """Calibrated Poisson forest for one (P(clear), environment) cell; returns (env, lam, seed)."""
    lam = calibrate_intensity(ClutterSpec(p_clear, obstacle_radius, mc_pairs),
                              np.random.default_rng(derive_seed(master, TAG_CALIB, p_idx)))
    env_seed = derive_seed(master, TAG_ENV, p_idx, env_idx)
    env = poisson_forest(lam, obstacle_radius, np.random.default_rng(env_seed), seed=env_seed)
    return env, lam, env_seed


# --------------------------------------------------------------------------
# scenarios


def load_bugtrap():
    """Shipped bug-trap asset: (environment, start point, goal point)."""
    data = json.loads(resources.files("lmprm").joinpath("assets/bugtrap.json").read_text())
    return env_from_dict(data["environment"]), np.array(data["start"]), np.array(data["goal"])


def run_bugtrap(spec: ExperimentSpec) -> list[ExperimentRecord]:
    if spec.env_path:
        data = json.loads(Path(spec.env_path).read_text())
        env = env_from_dict(data["environment"])
        start_xy, goal_xy = np.array(data["start"]), np.array(data["goal"])
    else:
        env, start_xy, goal_xy = load_bugtrap()
    n = _graph_size(spec, env, default_density=1000.0)
    master = spec.master_seed
    objectives = _objectives(spec)

    def cell(rep):
        attempt = 0
        while True:
            graph_seed = derive_seed(master, TAG_GRAPH, rep, attempt)
            graph = build_prm(env, n, objectives, seed=graph_seed)
            s, g = nearest_vertex(graph, start_xy), nearest_vertex(graph, goal_xy)
            comp = components(graph)
            if comp[s] == comp[g]:
                break
            attempt += 1
            log.info("bugtrap rep %d: start/goal disconnected, resampling graph", rep)
        recs = []
        ws = SearchWorkspace(graph.n)
        for obj in spec.objective_ids:
            tables = _build_tables(graph, obj, spec.landmark_counts,
                                   lambda k: derive_seed(master, TAG_TABLE, rep, k))
            recs.append(ExperimentRecord(
                _scenario_label("bugtrap", obj), obj, graph.n, graph_seed, rep, None, s, g,
                attempt, methods=run_methods(graph, obj, s, g, tables, ws)))
        return recs

    return [r for recs in _map(cell, list(range(spec.repetitions)), spec.threads) for r in recs]


def run_fraction_sweep(spec: ExperimentSpec) -> list[ExperimentRecord]:
    """One environment; per (n, k, repetition) a fresh landmark set and one random query."""
    master = spec.master_seed
    p = spec.p_clear[0]
    if spec.env_path:
        env, lam, env_seed = load_env(spec.env_path), None, None
    else:
        env, lam, env_seed = clutter_environment(p, spec.obstacle_radius, master, 0, 0,
                                                 spec.mc_pairs)
    objectives = _objectives(spec)
    sizes = spec.graph_sizes or (int(round((spec.density or 20_000) * env.mu_free)),)
    records = []
    for n in sizes:
        graph_seed = derive_seed(master, TAG_GRAPH, n)
        graph = build_prm(env, int(n), objectives, seed=graph_seed, threads=spec.threads)
        comp = components(graph)
        cells = [(obj, k, rep) for obj in spec.objective_ids
                 for k in spec.landmark_counts for rep in range(spec.repetitions)]

        def cell(key, graph=graph, comp=comp, graph_seed=graph_seed, n=n):
            obj, k, rep = key
            query_seed = derive_seed(master, TAG_QUERY, n, k, rep)
            s, g, resamples = sample_connected_query(comp, np.random.default_rng(query_seed))
            tables = _build_tables(graph, obj, (k,),
                                   lambda k: derive_seed(master, TAG_TABLE, n, k, rep))
            return ExperimentRecord(
                _scenario_label("fraction_sweep", obj), obj, graph.n, graph_seed, rep,
                query_seed, s, g, resamples, p if lam is not None else None, lam, env_seed,
                run_methods(graph, obj, s, g, tables))

        records.extend(_map(cell, cells, spec.threads))
    return records


def run_clutter_sweep(spec: ExperimentSpec) -> list[ExperimentRecord]:
    """Per P(clear): calibrate, sample environments, build PRMs and tables, run queries."""
    master = spec.master_seed
    objectives = _objectives(spec)
    cells = [(pi, e) for pi in range(len(spec.p_clear)) for e in range(spec.environments)]

    def cell(key):
        pi, e = key
        p = spec.p_clear[pi]
        env, lam, env_seed = clutter_environment(p, spec.obstacle_radius, master, pi, e,
                                                 spec.mc_pairs)
        n = _graph_size(spec, env, default_density=20_000.0)
        graph_seed = derive_seed(master, TAG_GRAPH, pi, e)
        graph = build_prm(env, n, objectives, seed=graph_seed)
        comp = components(graph)
        ws = SearchWorkspace(graph.n)
        recs = []
        for obj in spec.objective_ids:
            tables = _build_tables(graph, obj, spec.landmark_counts,
                                   lambda k: derive_seed(master, TAG_TABLE, pi, e, k))
            for q in range(spec.queries):
                query_seed = derive_seed(master, TAG_QUERY, pi, e, q)
                s, g, resamples = sample_connected_query(comp, np.random.default_rng(query_seed))
                recs.append(ExperimentRecord(
                    _scenario_label("clutter_sweep", obj), obj, graph.n, graph_seed, q,
                    query_seed, s, g, resamples, p, lam, env_seed,
                    run_methods(graph, obj, s, g, tables, ws)))
        return recs

    return [r for recs in _map(cell, cells, spec.threads) for r in recs]


def run(spec: ExperimentSpec) -> list[ExperimentRecord]:
    runner = {
        "bugtrap": run_bugtrap,
        "fraction_sweep": run_fraction_sweep,
        "clutter_sweep": run_clutter_sweep,
        "custom": run_clutter_sweep,
    }[spec.scenario]
    return runner(spec)


def _scenario_label(name, objective_id):
    return name if objective_id == "length" else f"{name}:{objective_id}"


# --------------------------------------------------------------------------
# reporting


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def record_rows(records, include_timing: bool = False):
    for r in records:
        for m in r.methods:
            yield {
                "scenario": r.scenario,
                "p_clear": _fmt(r.p_clear),
                "lambda": _fmt(r.lam),
                "env_seed": _fmt(r.env_seed),
                "n": r.n,
                "graph_seed": r.graph_seed,
                "k": _fmt(m.k),
                "table_seed": _fmt(m.table_seed),
                "query_idx": r.query_idx,
                "query_seed": _fmt(r.query_seed),
                "method": m.method,
                "iterations": m.iterations,
                "pushes": m.pushes,
                "cost": _fmt(float(m.cost)),
                "wall_time_us": int(round(m.wall_time * 1e6)) if include_timing else "",
                "preprocess_time_us": (int(round(m.preprocess_time * 1e6))
                                       if include_timing and m.preprocess_time is not None
                                       else ""),
                "resamples": r.resamples,
                "status": m.status,
            }


def summarize(records) -> list[dict]:
    """Per (scenario, p_clear, n, method) cell: iteration and time ratios against Dijkstra."""
    cells: dict = {}
    for r in records:
        dj = r.method("dijkstra")
        for m in r.methods:
            key = (r.scenario, r.p_clear, r.n, m.method)
            c = cells.setdefault(key, {"iters": [], "ratio": [], "time_frac": [], "pre": []})
            c["iters"].append(m.iterations)
            c["ratio"].append(dj.iterations / max(m.iterations, 1))
            if dj.wall_time > 0:
                c["time_frac"].append(m.wall_time / dj.wall_time)
            if m.preprocess_time is not None:
                c["pre"].append(m.preprocess_time)
    out = []
    for (scenario, p, n, method), c in sorted(cells.items(), key=lambda kv: str(kv[0])):
        out.append({
            "scenario": scenario, "p_clear": p, "n": n, "method": method,
            "queries": len(c["iters"]),
            "median_iterations": statistics.median(c["iters"]),
            "mean_iterations": statistics.fmean(c["iters"]),
            "median_dijkstra_ratio": statistics.median(c["ratio"]),
            "mean_dijkstra_ratio": statistics.fmean(c["ratio"]),
            "median_time_fraction": statistics.median(c["time_frac"]) if c["time_frac"] else None,
            "median_preprocess_s": statistics.median(c["pre"]) if c["pre"] else None,
        })
    return out


def emit_report(records, path, include_timing: bool = False) -> list[dict]:
    """Write one CSV row per (query, method) plus ``<stem>.summary.json``.

    Timing columns are left blank unless ``include_timing`` is set, which keeps
    the CSV byte-identical across runs with the same master seed.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in record_rows(records, include_timing):
            writer.writerow(row)
    summary = summarize(records)
    path.with_suffix(".summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    return summary
