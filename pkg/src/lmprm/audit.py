"""Invariant audits over built graphs and landmark tables (used by ``lmprm validate``)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra as scipy_dijkstra

from .env import Environment, segments_clear
from .landmarks import INCOMING, LandmarkHeuristic, LandmarkTable, sssp
from .roadmap import RoadmapGraph
from .search import astar, dijkstra, euclidean_heuristic

TOL = 1e-9


@dataclass
class AuditResult:
    name: str
    ok: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.name}" + (f": {self.detail}" if self.detail else "")


def audit_csr(graph: RoadmapGraph) -> AuditResult:
    off, nb = graph.offsets, graph.neighbors
    problems = []
    if off.shape != (graph.n + 1,) or off[0] != 0 or off[-1] != graph.m:
        problems.append("offset bounds")
    if np.any(np.diff(off) < 0):
        problems.append("offsets not monotone")
    if graph.m and (nb.min() < 0 or nb.max() >= graph.n):
        problems.append("neighbour id out of range")
    for oid, w in graph.edge_weights.items():
        if w.shape != (graph.m,):
            problems.append(f"weights {oid!r} misaligned")
    return AuditResult("csr_well_formed", not problems, ", ".join(problems))


def audit_symmetry(graph: RoadmapGraph) -> AuditResult:
    src, dst = graph.edge_sources, graph.neighbors
    if np.any(src == dst):
        return AuditResult("adjacency_symmetric", False, "self-loop present")
    keys = src * graph.n + dst
    if np.any(np.diff(keys) <= 0):
        return AuditResult("adjacency_symmetric", False, "duplicate or unsorted edges")
    rev = dst * graph.n + src
    pos = np.searchsorted(keys, rev)
    pos = np.minimum(pos, len(keys) - 1)
    ok = bool(np.all(keys[pos] == rev)) if graph.m else True
    return AuditResult("adjacency_symmetric", ok, "" if ok else "missing reverse edge")


def audit_edge_geometry(graph: RoadmapGraph, env: Environment | None = None) -> list[AuditResult]:
    P = graph.vertices[graph.edge_sources]
    Q = graph.vertices[graph.neighbors]
    length = np.sqrt(np.einsum("ij,ij->i", P - Q, P - Q))
    out = [AuditResult("edges_within_radius", bool(np.all(length < graph.connection_radius)))]
    bad = [oid for oid, w in graph.edge_weights.items() if np.any(w < 0) or np.any(np.isnan(w))]
    out.append(AuditResult("weights_nonnegative", not bad, ", ".join(bad)))
    if "length" in graph.edge_weights:
        err = float(np.max(np.abs(graph.edge_weights["length"] - length), initial=0.0))
        out.append(AuditResult("length_weights_euclidean", err <= 1e-12, f"max err {err:.3g}"))
    if env is not None:
        ok = segments_clear(env, P, Q)
        out.append(AuditResult("edges_collision_free", bool(ok.all()),
                               f"{int((~ok).sum())} colliding edges"))
    return out


def audit_search(graph: RoadmapGraph, objective_id: str, rng: np.random.Generator,
                 queries: int = 20) -> AuditResult:
    """Dijkstra and (for length) Euclidean A* against scipy's Dijkstra."""
    w = graph.weights(objective_id)
    A = sp.csr_matrix((w, graph.neighbors, graph.offsets), shape=(graph.n, graph.n))
    bad = 0
    for _ in range(queries):
        s, g = (int(v) for v in rng.integers(graph.n, size=2))
        ref = float(scipy_dijkstra(A, indices=s)[g])
        got = [dijkstra(graph, objective_id, s, g).cost]
        if objective_id == "length":
            got.append(astar(graph, objective_id, s, g, euclidean_heuristic(graph)).cost)
        for c in got:
            if not (c == ref or abs(c - ref) <= TOL * max(ref, 1.0)):
                bad += 1
    return AuditResult(f"search_oracle[{objective_id}]", bad == 0, f"{bad} mismatches / {queries}")


def audit_table(table: LandmarkTable, graph: RoadmapGraph, rng: np.random.Generator,
                goals: int = 20, rows: int = 3) -> list[AuditResult]:
    out = []
    fp_ok = table.graph_fingerprint == graph.fingerprint and table.n == graph.n
    out.append(AuditResult("table_fingerprint", fp_ok,
                           "" if fp_ok else "table was built for a different graph"))
    if not fp_ok:
        return out
    oid = table.objective_id

    # admissibility: exact d(., g) for every vertex at a few goals
    violations = 0
    worst = 0.0
    for g in rng.integers(graph.n, size=goals):
        d = sssp(graph, oid, int(g), INCOMING)
        h = LandmarkHeuristic(table, int(g)).evaluate_all()
        with np.errstate(invalid="ignore"):
            excess = h - d
        excess[np.isinf(d) & np.isinf(h)] = 0.0
        tol = TOL * np.maximum(np.where(np.isinf(d), 1.0, d), 1.0)
        viol = excess > tol
        violations += int(viol.sum())
        if np.any(np.isfinite(excess)):
            worst = max(worst, float(np.max(excess[np.isfinite(excess)], initial=0.0)))
    out.append(AuditResult("landmark_admissible", violations == 0,
                           f"{violations} violations, worst excess {worst:.3g}"))

    if table.symmetric and table.k:
        bad = 0
        for g in rng.integers(graph.n, size=min(goals, 5)):
            h = LandmarkHeuristic(table, int(g)).evaluate_all()
            hu = h[graph.edge_sources]
            hv = h[graph.neighbors]
            finite = np.isfinite(hu) & np.isfinite(hv)
            lhs, rhs = hu[finite], graph.weights(oid)[finite] + hv[finite]
            bad += int(np.sum(lhs > rhs + TOL * np.maximum(rhs, 1.0)))
        out.append(AuditResult("landmark_consistent", bad == 0, f"{bad} violating edges"))

    if table.k:
        pick = rng.choice(table.k, size=min(rows, table.k), replace=False)
        ok = all(np.array_equal(sssp(graph, oid, int(table.landmark_ids[i])), table.dist_to[i])
                 for i in pick)
        out.append(AuditResult("table_rows_exact", ok))
    return out


def run_all(graph: RoadmapGraph, table: LandmarkTable | None = None,
            env: Environment | None = None, seed: int = 0) -> list[AuditResult]:
    rng = np.random.default_rng(seed)
    results = [audit_csr(graph), audit_symmetry(graph)]
    results += audit_edge_geometry(graph, env)
    for oid in graph.edge_weights:
        results.append(audit_search(graph, oid, rng))
    if table is not None:
        results += audit_table(table, graph, rng)
    return results
