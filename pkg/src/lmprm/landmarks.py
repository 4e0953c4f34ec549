"""Landmark (ALT) heuristic: exact SSSP tables from a few vertices and the triangle bound.

For a landmark l and goal g, the triangle inequality gives
``d(x, g) >= d(l, g) - d(l, x)`` and ``d(x, g) >= d(x, l) - d(g, l)``;
the heuristic is the largest such bound over all landmarks. For symmetric
objectives both bounds fold into ``|d(x, l) - d(l, g)|``.
"""

from __future__ import annotations

import math
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import _kernels
from ._kernels import crc64
from .errors import FingerprintMismatch, FormatError
from .roadmap import RoadmapGraph, _Reader, check_trailer
from .search import Heuristic

TABLE_MAGIC = b"LMRK"
TABLE_VERSION = 1

OUTGOING = "outgoing"
INCOMING = "incoming"


@dataclass(frozen=True, eq=False)
class LandmarkTable:
    objective_id: str
    landmark_ids: np.ndarray      # (k,) int64, ascending
    dist_to: np.ndarray           # (k, n): d(landmark -> v)
    dist_from: np.ndarray         # (k, n): d(v -> landmark); same object when symmetric
    graph_fingerprint: int
    seed: int = 0
    build_time: float = 0.0

    @property
    def k(self) -> int:
        return len(self.landmark_ids)

    @property
    def n(self) -> int:
        return self.dist_to.shape[1]

    @property
    def symmetric(self) -> bool:
        return self.dist_from is self.dist_to

    # vertex-major copies so one heuristic evaluation reads a contiguous row
    @cached_property
    def to_by_vertex(self) -> np.ndarray:
        return np.ascontiguousarray(self.dist_to.T)

    @cached_property
    def from_by_vertex(self) -> np.ndarray:
        if self.symmetric:
            return self.to_by_vertex
        return np.ascontiguousarray(self.dist_from.T)

    def check_graph(self, graph: RoadmapGraph) -> None:
        if graph.fingerprint != self.graph_fingerprint or graph.n != self.n:
            raise FingerprintMismatch(
                f"table built for graph {self.graph_fingerprint:#018x}, "
                f"got {graph.fingerprint:#018x}")


def select_landmarks(graph: RoadmapGraph, k: int, rng: np.random.Generator) -> np.ndarray:
    """k distinct vertex ids drawn uniformly, sorted ascending."""
    if not 1 <= k <= graph.n:
        raise ValueError(f"k must be in [1, {graph.n}], got {k}")
    return np.sort(rng.choice(graph.n, size=k, replace=False)).astype(np.int64)


def sssp(graph: RoadmapGraph, objective_id: str, source: int,
         direction: str = OUTGOING) -> np.ndarray:
    """Shortest-path costs from ``source`` (outgoing) or to it (incoming); inf if unreachable."""
    if direction == OUTGOING:
        w = graph.weights(objective_id)
    elif direction == INCOMING:
        w = graph.reverse_weights(objective_id)
    else:
        raise ValueError(f"direction must be {OUTGOING!r} or {INCOMING!r}")
    if not 0 <= source < graph.n:
        raise IndexError(f"source {source} out of range")
    out = np.empty(graph.n, np.float64)
    _kernels.sssp_kernel(graph.offsets, graph.neighbors, w, int(source), out)
    return out


def _fill_rows(graph, w, ids, out, threads):
    def one(i):
        _kernels.sssp_kernel(graph.offsets, graph.neighbors, w, int(ids[i]), out[i])

    if threads <= 1 or len(ids) < 2:
        for i in range(len(ids)):
            one(i)
    else:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(one, range(len(ids))))


def build_landmark_table(graph: RoadmapGraph, objective_id: str, landmark_ids,
                         seed: int = 0, threads: int = 1) -> LandmarkTable:
    """One Dijkstra per landmark (two when the objective is asymmetric)."""
    ids = np.sort(np.asarray(landmark_ids, dtype=np.int64).reshape(-1))
    if len(ids) and (ids[0] < 0 or ids[-1] >= graph.n):
        raise IndexError("landmark id out of range")
    w = graph.weights(objective_id)
    symmetric = graph.is_symmetric(objective_id)
    fingerprint = graph.fingerprint
    w_check = crc64(w.tobytes())
    wrev = None if symmetric else graph.reverse_weights(objective_id)

    t0 = time.perf_counter()
    dist_to = np.empty((len(ids), graph.n), np.float64)
    _fill_rows(graph, w, ids, dist_to, threads)
    if symmetric:
        dist_from = dist_to
    else:
        dist_from = np.empty((len(ids), graph.n), np.float64)
        _fill_rows(graph, wrev, ids, dist_from, threads)
    elapsed = time.perf_counter() - t0

    if crc64(w.tobytes()) != w_check:
        raise FingerprintMismatch("graph weights changed while the table was being built")
    return LandmarkTable(objective_id, ids, dist_to, dist_from, fingerprint, seed, elapsed)


def _bound(a: float, b: float) -> float:
    """Lower bound a - b where either side may be inf."""
    if a == math.inf:
        return 0.0 if b == math.inf else math.inf
    if b == math.inf:
        return 0.0
    return a - b


class LandmarkHeuristic(Heuristic):
    """Landmark bound for one goal; goal-side table columns are cached at construction."""

    def __init__(self, table: LandmarkTable, goal: int):
        self.table = table
        self.goal = int(goal)
        self.gto = np.ascontiguousarray(table.dist_to[:, self.goal])
        self.gfrom = np.ascontiguousarray(table.dist_from[:, self.goal])

    def evaluate(self, x: int, goal: int | None = None) -> float:
        t = self.table
        if goal is None or goal == self.goal:
            gto, gfrom = self.gto, self.gfrom
        else:
            gto, gfrom = t.dist_to[:, goal], t.dist_from[:, goal]
        h = 0.0
        for l in range(t.k):
            h = max(h, _bound(gto[l], t.dist_to[l, x]), _bound(t.dist_from[l, x], gfrom[l]))
            if h == math.inf:
                break
        return h

    def evaluate_all(self) -> np.ndarray:
        """h(x, goal) for every vertex at once (vectorised, used by audits)."""
        t = self.table
        n = t.n
        if t.k == 0:
            return np.zeros(n)
        with np.errstate(invalid="ignore"):
            a = self.gto[:, None] - t.dist_to
            b = t.dist_from - self.gfrom[:, None]
        for arr, left, right in ((a, self.gto[:, None], t.dist_to),
                                 (b, t.dist_from, self.gfrom[:, None])):
            li, ri = np.isinf(left), np.isinf(right)
            li, ri = np.broadcast_to(li, arr.shape), np.broadcast_to(ri, arr.shape)
            arr[li & ri] = 0.0
            arr[li & ~ri] = math.inf
            arr[~li & ri] = 0.0
        return np.maximum(np.maximum(a, b).max(axis=0), 0.0)

    def kernel_args(self, graph, goal):
        if goal != self.goal:
            return LandmarkHeuristic(self.table, goal).kernel_args(graph, goal)
        t = self.table
        return (2, graph.vertices, np.zeros(graph.dim), t.to_by_vertex, t.from_by_vertex,
                self.gto, self.gfrom, t.symmetric)


def landmark_heuristic(table: LandmarkTable, goal: int,
                       graph: RoadmapGraph | None = None) -> LandmarkHeuristic:
    if graph is not None:
        table.check_graph(graph)
    if not 0 <= goal < table.n:
        raise IndexError(f"goal {goal} out of range")
    return LandmarkHeuristic(table, goal)


@dataclass
class QualityStats:
    mean: float
    median: float
    min: float
    pairs: int
    skipped: int
    ratios: np.ndarray = field(repr=False, default=None)


def heuristic_quality(table: LandmarkTable, graph: RoadmapGraph, objective_id: str,
                      pairs: int, rng: np.random.Generator) -> QualityStats:
    """Ratio h/d over random connected vertex pairs (x != goal).

    The true cost comes from an incoming SSSP at the goal, which for a
    symmetric objective reproduces a landmark row bit for bit. Ratios are
    clipped to 1 so floating-point ties do not report values just above it.
    """
    if pairs < 1:
        raise ValueError("pairs must be >= 1")
    ratios = []
    skipped = 0
    while len(ratios) < pairs:
        x, g = (int(v) for v in rng.integers(graph.n, size=2))
        if x == g:
            skipped += 1
            continue
        d = sssp(graph, objective_id, g, INCOMING)[x]
        if d == math.inf:
            skipped += 1
            continue
        h = LandmarkHeuristic(table, g).evaluate(x)
        ratios.append(min(h / d, 1.0) if d > 0 else 1.0)
    r = np.array(ratios)
    return QualityStats(float(r.mean()), float(np.median(r)), float(r.min()), len(r), skipped, r)


# --------------------------------------------------------------------------
# LMRK file


def table_to_bytes(t: LandmarkTable) -> bytes:
    oid = t.objective_id.encode()
    parts = [
        TABLE_MAGIC,
        struct.pack("<I", TABLE_VERSION),
        struct.pack("<I", len(oid)) + oid,
        struct.pack("<QQBQQ", t.k, t.n, 1 if t.symmetric else 0,
                    t.graph_fingerprint & 0xFFFFFFFFFFFFFFFF, t.seed & 0xFFFFFFFFFFFFFFFF),
        t.landmark_ids.astype("<u8").tobytes(),
        t.dist_to.astype("<f8").tobytes(),
    ]
    if not t.symmetric:
        parts.append(t.dist_from.astype("<f8").tobytes())
    body = b"".join(parts)
    return body + struct.pack("<Q", crc64(body))


def table_from_bytes(buf: bytes, graph: RoadmapGraph | None = None) -> LandmarkTable:
    if buf[:4] != TABLE_MAGIC:
        raise FormatError("not an LMRK table file (bad magic)")
    rd = _Reader(buf)
    rd.take(4)
    (version,) = rd.unpack("<I")
    if version != TABLE_VERSION:
        raise FormatError(f"unsupported table version {version}")
    oid = rd.string()
    k, n, sym, fp, seed = rd.unpack("<QQBQQ")
    expected = rd.pos + 8 * k + 8 * k * n * (1 if sym else 2) + 8
    if len(buf) != expected:
        raise FormatError("truncated file" if len(buf) < expected else "trailing bytes")
    check_trailer(buf)
    ids = rd.array("<u8", k).astype(np.int64)
    dist_to = rd.array("<f8", k * n).astype(np.float64).reshape(k, n)
    dist_from = dist_to if sym else rd.array("<f8", k * n).astype(np.float64).reshape(k, n)
    table = LandmarkTable(oid, ids, dist_to, dist_from, fp, seed)
    if graph is not None:
        table.check_graph(graph)
    return table


def save_table(table: LandmarkTable, path) -> None:
    Path(path).write_bytes(table_to_bytes(table))


def load_table(path, graph: RoadmapGraph | None = None) -> LandmarkTable:
    return table_from_bytes(Path(path).read_bytes(), graph)
