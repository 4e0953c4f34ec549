"""PRM* construction, spatial queries, edge objectives and the PRMG graph file."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from ._kernels import crc64
from .env import Environment, ball_volume, sample_free_batch, segments_clear
from .errors import FormatError

GRAPH_MAGIC = b"PRMG"
GRAPH_VERSION = 1

WORK_ASCENT_PENALTY = 5.0


@dataclass(frozen=True)
class CostObjective:
    """Additive edge cost. ``batch`` evaluates many edges at once (rows of X to rows of Y)."""

    objective_id: str
    edge_cost: Callable
    batch: Callable | None = None
    symmetric: bool = True

    def costs(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        if self.batch is not None:
            return self.batch(X, Y)
        return np.array([self.edge_cost(x, y) for x, y in zip(X, Y)], dtype=np.float64)


def _length_batch(X, Y):
    return np.sqrt(np.einsum("ij,ij->i", X - Y, X - Y))


def _work_batch(X, Y):
    return _length_batch(X, Y) + WORK_ASCENT_PENALTY * np.maximum(0.0, Y[:, -1] - X[:, -1])


LENGTH = CostObjective(
    "length",
    lambda x, y: float(np.linalg.norm(np.subtract(x, y))),
    _length_batch,
)

# Stand-in for a mechanical-work objective: climbing along the last axis costs extra.
WORK = CostObjective(
    "work",
    lambda x, y: float(np.linalg.norm(np.subtract(x, y))
                       + WORK_ASCENT_PENALTY * max(0.0, y[-1] - x[-1])),
    _work_batch,
    symmetric=False,
)

OBJECTIVES = {o.objective_id: o for o in (LENGTH, WORK)}


def get_objective(objective_id: str) -> CostObjective:
    try:
        return OBJECTIVES[objective_id]
    except KeyError:
        raise KeyError(f"unknown objective {objective_id!r}; known: {sorted(OBJECTIVES)}") from None


@dataclass(frozen=True, eq=False)
class RoadmapGraph:
    vertices: np.ndarray          # (n, d)
    offsets: np.ndarray           # (n+1,) int64
    neighbors: np.ndarray         # (m,) int64
    edge_weights: dict            # objective id -> (m,) float64
    connection_radius: float
    build_seed: int = 0
    symmetric_objectives: frozenset = field(default_factory=frozenset)

    @property
    def n(self) -> int:
        return self.vertices.shape[0]

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def m(self) -> int:
        return self.neighbors.shape[0]

    def is_symmetric(self, objective_id: str) -> bool:
        if objective_id in self.symmetric_objectives:
            return True
        w = self.weights(objective_id)
        return bool(np.array_equal(w, w[self.reverse_edge]))

    def weights(self, objective_id: str) -> np.ndarray:
        try:
            return self.edge_weights[objective_id]
        except KeyError:
            raise KeyError(f"graph has no weights for objective {objective_id!r}") from None

    @cached_property
    def edge_sources(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.offsets))

    @cached_property
    def reverse_edge(self) -> np.ndarray:
        """Index of edge (v, u) for every stored edge (u, v)."""
        n = self.n
        keys = self.edge_sources * n + self.neighbors
        return np.searchsorted(keys, self.neighbors * n + self.edge_sources)

    def reverse_weights(self, objective_id: str) -> np.ndarray:
        """Weights of the transposed graph, aligned with the same CSR layout."""
        cache = self.__dict__.setdefault("_rev_w", {})
        if objective_id not in cache:
            cache[objective_id] = np.ascontiguousarray(self.weights(objective_id)[self.reverse_edge])
        return cache[objective_id]

    @cached_property
    def kdtree(self) -> cKDTree:
        return cKDTree(self.vertices)

    @cached_property
    def fingerprint(self) -> int:
        """CRC-64 of the serialised graph body; binds landmark tables to this build."""
        return crc64(_graph_body(self))

    def degree(self) -> np.ndarray:
        return np.diff(self.offsets)

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[self.offsets[v]: self.offsets[v + 1]]


def connection_radius(n: float, d: int, mu_free: float) -> float:
    """PRM* radius ((2 + 2/d) * mu_free/|B_1| * log(n)/n) ** (1/d).

    ``n`` may be real-valued.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not mu_free > 0:
        raise ValueError("mu_free must be positive")
    return ((2 + 2 / d) * (mu_free / ball_volume(d)) * (math.log(n) / n)) ** (1 / d)


def _strict_pairs(points: np.ndarray, r: float, tree: cKDTree | None = None) -> np.ndarray:
    tree = tree or cKDTree(points)
    # pad the query radius, then enforce the strict bound with our own distances
    pairs = tree.query_pairs(r * (1 + 1e-9) + 1e-300, output_type="ndarray")
    if len(pairs) == 0:
        return pairs.reshape(0, 2).astype(np.int64)
    diff = points[pairs[:, 0]] - points[pairs[:, 1]]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    return pairs[dist < r].astype(np.int64)


def radius_neighbors(index, x, r: float) -> list[int]:
    """Ids of vertices v with ||x - v|| < r, excluding exact copies of x, ascending.

    ``index`` is a RoadmapGraph or an (n, d) coordinate array.
    """
    if isinstance(index, RoadmapGraph):
        pts, tree = index.vertices, index.kdtree
    else:
        pts = np.asarray(index, dtype=np.float64)
        tree = cKDTree(pts)
    x = np.asarray(x, dtype=np.float64)
    cand = np.asarray(tree.query_ball_point(x, r * (1 + 1e-9) + 1e-300), dtype=np.int64)
    if len(cand) == 0:
        return []
    diff = pts[cand] - x
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    keep = cand[(dist < r) & (dist > 0)]
    return sorted(int(v) for v in keep)


def nearest_vertex(graph: RoadmapGraph, x) -> int:
    """Closest vertex to x; ties go to the smallest id."""
    if graph.n == 0:
        raise ValueError("graph has no vertices")
    x = np.asarray(x, dtype=np.float64)
    dist, idx = graph.kdtree.query(x)
    # look for exact ties at the same distance
    cand = graph.kdtree.query_ball_point(x, dist * (1 + 1e-12) + 1e-300)
    if len(cand) <= 1:
        return int(idx)
    cand = np.asarray(cand, dtype=np.int64)
    diff = graph.vertices[cand] - x
    d2 = np.einsum("ij,ij->i", diff, diff)
    best = d2.min()
    return int(cand[d2 == best].min())


def build_csr(n: int, pairs: np.ndarray):
    """Symmetric CSR from undirected pairs; rows are sorted by neighbour id."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    src = np.concatenate([pairs[:, 0], pairs[:, 1]])
    dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
    order = np.lexsort((dst, src))
    src, dst = src[order], dst[order]
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(src, minlength=n), out=offsets[1:])
    return offsets, np.ascontiguousarray(dst)


def graph_from_edges(vertices: np.ndarray, pairs: np.ndarray, objectives: Sequence[CostObjective],
                     radius: float = math.inf, build_seed: int = 0) -> RoadmapGraph:
    vertices = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
    offsets, nbrs = build_csr(len(vertices), pairs)
    src = np.repeat(np.arange(len(vertices), dtype=np.int64), np.diff(offsets))
    weights = {
        o.objective_id: np.ascontiguousarray(o.costs(vertices[src], vertices[nbrs]), dtype=np.float64)
        for o in objectives
    }
    return RoadmapGraph(
        vertices=vertices,
        offsets=offsets,
        neighbors=nbrs,
        edge_weights=weights,
        connection_radius=float(radius),
        build_seed=int(build_seed),
        symmetric_objectives=frozenset(o.objective_id for o in objectives if o.symmetric),
    )


def build_prm(env: Environment, n: int, objectives: Sequence[CostObjective] = (LENGTH,),
              rng: np.random.Generator | None = None, seed: int = 0,
              vertices: np.ndarray | None = None, threads: int = 1) -> RoadmapGraph:
    """PRM*: n free samples, joined to every vertex strictly within the radius by a clear segment.

    Each unordered pair is collision-checked once and stored in both
    directions. ``vertices`` overrides sampling (the radius still follows n).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    r = connection_radius(n, env.dim, env.mu_free)
    if vertices is None:
        rng = rng if rng is not None else np.random.default_rng(seed)
        vertices = sample_free_batch(env, n, rng, unique=True)
    vertices = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
    pairs = _strict_pairs(vertices, r)
    if len(pairs):
        ok = segments_clear(env, vertices[pairs[:, 0]], vertices[pairs[:, 1]], threads=threads)
        pairs = pairs[ok]
    return graph_from_edges(vertices, pairs, objectives, r, seed)


# --------------------------------------------------------------------------
# PRMG file


def _graph_body(g: RoadmapGraph) -> bytes:
    ids = list(g.edge_weights)
    parts = [
        GRAPH_MAGIC,
        struct.pack("<IIQQdQI", GRAPH_VERSION, g.dim, g.n, g.m, g.connection_radius,
                    g.build_seed & 0xFFFFFFFFFFFFFFFF, len(ids)),
    ]
    for oid in ids:
        raw = oid.encode()
        parts.append(struct.pack("<I", len(raw)) + raw)
    parts.append(g.vertices.astype("<f8").tobytes())
    parts.append(g.offsets.astype("<u8").tobytes())
    parts.append(g.neighbors.astype("<u8").tobytes())
    for oid in ids:
        parts.append(g.edge_weights[oid].astype("<f8").tobytes())
    return b"".join(parts)


def graph_to_bytes(g: RoadmapGraph) -> bytes:
    body = _graph_body(g)
    return body + struct.pack("<Q", crc64(body))


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, nbytes: int) -> bytes:
        if self.pos + nbytes > len(self.buf):
            raise FormatError("truncated file")
        out = self.buf[self.pos: self.pos + nbytes]
        self.pos += nbytes
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: str, count: int) -> np.ndarray:
        size = np.dtype(dtype).itemsize * count
        return np.frombuffer(self.take(size), dtype=dtype).copy()

    def string(self) -> str:
        (length,) = self.unpack("<I")
        return self.take(length).decode()


def check_trailer(buf: bytes) -> bytes:
    if len(buf) < 12:
        raise FormatError("truncated file")
    body, (stored,) = buf[:-8], struct.unpack("<Q", buf[-8:])
    if crc64(body) != stored:
        raise FormatError("checksum mismatch")
    return body


def graph_from_bytes(buf: bytes) -> RoadmapGraph:
    if buf[:4] != GRAPH_MAGIC:
        raise FormatError("not a PRMG graph file (bad magic)")
    rd = _Reader(buf)
    rd.take(4)
    version, d, n, m, radius, seed, nobj = rd.unpack("<IIQQdQI")
    if version != GRAPH_VERSION:
        raise FormatError(f"unsupported graph version {version}")
    ids = [rd.string() for _ in range(nobj)]
    expected = rd.pos + 8 * (n * d + (n + 1) + m + nobj * m) + 8
    if len(buf) != expected:
        raise FormatError("truncated file" if len(buf) < expected else "trailing bytes")
    check_trailer(buf)
    vertices = rd.array("<f8", n * d).astype(np.float64).reshape(n, d)
    offsets = rd.array("<u8", n + 1).astype(np.int64)
    nbrs = rd.array("<u8", m).astype(np.int64)
    weights = {oid: rd.array("<f8", m).astype(np.float64) for oid in ids}
    sym = frozenset(oid for oid in ids if oid in OBJECTIVES and OBJECTIVES[oid].symmetric)
    return RoadmapGraph(vertices, offsets, nbrs, weights, radius, seed, sym)


def save_graph(graph: RoadmapGraph, path) -> None:
    Path(path).write_bytes(graph_to_bytes(graph))


def load_graph(path) -> RoadmapGraph:
    return graph_from_bytes(Path(path).read_bytes())
