"""A* over a RoadmapGraph with pluggable heuristics.

Queue semantics: entries are keyed by label + h and ties go to the smaller
vertex id. There is no closed set; an entry whose stored label is worse
than the vertex's current label is stale and skipped without counting as an
iteration. The goal test happens on pop.
"""

from __future__ import annotations

import heapq
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ParentCycleError
from .roadmap import RoadmapGraph

FOUND = "found"
NO_SOLUTION = "no-solution"

_EMPTY2 = np.zeros((0, 0), dtype=np.float64)
_EMPTY1 = np.zeros(0, dtype=np.float64)


class Heuristic:
    """Base class: ``evaluate(v, goal)`` returns a lower bound on d(v, goal), possibly inf."""

    def evaluate(self, v: int, goal: int) -> float:
        raise NotImplementedError

    # (mode, coords, goal_xy, dT, fT, gto, gfrom, symmetric) for the compiled search,
    # or None to fall back to the interpreted loop
    def kernel_args(self, graph: RoadmapGraph, goal: int):
        return None


class ZeroHeuristic(Heuristic):
    def evaluate(self, v, goal):
        return 0.0

    def kernel_args(self, graph, goal):
        return 0, _EMPTY2, _EMPTY1, _EMPTY2, _EMPTY2, _EMPTY1, _EMPTY1, True


class EuclideanHeuristic(Heuristic):
    """Straight-line distance. Admissible for path length, not in general."""

    def __init__(self, graph: RoadmapGraph):
        self.coords = graph.vertices

    def evaluate(self, v, goal):
        return float(np.sqrt(np.sum((self.coords[v] - self.coords[goal]) ** 2)))

    def kernel_args(self, graph, goal):
        return (1, self.coords, np.ascontiguousarray(self.coords[goal]), _EMPTY2, _EMPTY2,
                _EMPTY1, _EMPTY1, True)


class FunctionHeuristic(Heuristic):
    def __init__(self, fn):
        self.fn = fn

    def evaluate(self, v, goal):
        return float(self.fn(v, goal))


def euclidean_heuristic(graph: RoadmapGraph) -> EuclideanHeuristic:
    return EuclideanHeuristic(graph)


@dataclass
class SearchResult:
    status: str
    path: list = field(default_factory=list)
    cost: float = math.inf
    iterations: int = 0
    pushes: int = 0
    wall_time: float = 0.0

    @property
    def found(self) -> bool:
        return self.status == FOUND


class SearchWorkspace:
    """Per-query scratch arrays reused across queries on one graph.

    Entries are only trusted when their epoch stamp matches the current
    query, so nothing is cleared between queries. Not thread-safe; use one
    workspace per concurrent query.
    """

    def __init__(self, n: int, heap_capacity: int = 1024):
        self.n = n
        self.label = np.empty(n, np.float64)
        self.parent = np.empty(n, np.int64)
        self.lepoch = np.zeros(n, np.int64)
        self.hval = np.empty(n, np.float64)
        self.hepoch = np.zeros(n, np.int64)
        self.epoch = 0
        self._alloc_heap(heap_capacity)

    def _alloc_heap(self, cap: int) -> None:
        self.hk = np.empty(cap, np.float64)
        self.hv = np.empty(cap, np.int64)
        self.hg = np.empty(cap, np.float64)

    def ensure_heap(self, cap: int) -> None:
        if self.hk.shape[0] < cap:
            self._alloc_heap(cap)

    def next_epoch(self) -> int:
        self.epoch += 1
        return self.epoch


def path_to_root(parent, goal: int) -> list:
    """Follow parent links from ``goal`` to the root (parent None or -1); start-first."""
    seq = [goal]
    limit = len(parent) + 1
    v = goal
    while True:
        p = parent[v] if not isinstance(parent, dict) else parent.get(v)
        if p is None or p == -1:
            break
        v = int(p)
        seq.append(v)
        if len(seq) > limit:
            raise ParentCycleError(f"cycle in parent chain starting at {goal}")
    seq.reverse()
    return seq


def _check_ids(graph, start, goal):
    for v in (start, goal):
        if not 0 <= v < graph.n:
            raise IndexError(f"vertex id {v} out of range [0, {graph.n})")


def astar(graph: RoadmapGraph, objective_id: str, start: int, goal: int,
          h: Heuristic | None = None, workspace: SearchWorkspace | None = None,
          trace: list | None = None) -> SearchResult:
    """Minimum-cost path from start to goal (optimal when h is admissible).

    Passing a ``trace`` list runs the interpreted loop and appends the
    (key, vertex) of every counted pop.
    """
    w = graph.weights(objective_id)
    start, goal = int(start), int(goal)
    _check_ids(graph, start, goal)
    h = h or ZeroHeuristic()
    args = None if trace is not None else h.kernel_args(graph, goal)
    if args is None:
        return _astar_python(graph, w, start, goal, h, trace)

    ws = workspace if workspace is not None else SearchWorkspace(graph.n)
    ws.ensure_heap(graph.m + 1)
    while True:
        epoch = ws.next_epoch()
        t0 = time.perf_counter()
        status, iters, pushes, cost = _kernels.astar_kernel(
            graph.offsets, graph.neighbors, w, start, goal, *args,
            ws.label, ws.parent, ws.lepoch, ws.hval, ws.hepoch, epoch, ws.hk, ws.hv, ws.hg)
        elapsed = time.perf_counter() - t0
        if status >= 0:
            break
        ws.ensure_heap(2 * ws.hk.shape[0])
    if status == 0:
        return SearchResult(NO_SOLUTION, [], math.inf, int(iters), int(pushes), elapsed)
    return SearchResult(FOUND, path_to_root(ws.parent, goal), float(cost), int(iters),
                        int(pushes), elapsed)


def _astar_python(graph, w, start, goal, h, trace=None):
    """Interpreted twin of the compiled search for arbitrary heuristics."""
    t0 = time.perf_counter()
    offsets, nbrs = graph.offsets, graph.neighbors
    label = {start: 0.0}
    parent = {start: None}
    hcache = {}

    def hv(v):
        if v not in hcache:
            hcache[v] = h.evaluate(v, goal)
        return hcache[v]

    iterations = pushes = 0
    queue = []
    if hv(start) != math.inf:
        queue.append((hv(start), start, 0.0))
        pushes = 1
    while queue:
        key, v, gv = heapq.heappop(queue)
        if gv > label[v]:
            continue
        iterations += 1
        if trace is not None:
            trace.append((key, v))
        if v == goal:
            return SearchResult(FOUND, path_to_root(parent, goal), gv, iterations, pushes,
                                time.perf_counter() - t0)
        for e in range(offsets[v], offsets[v + 1]):
            u = int(nbrs[e])
            cand = gv + w[e]
            if cand < label.get(u, math.inf):
                label[u] = cand
                parent[u] = v
                hu = hv(u)
                if hu == math.inf:
                    continue
                heapq.heappush(queue, (cand + hu, u, cand))
                pushes += 1
    return SearchResult(NO_SOLUTION, [], math.inf, iterations, pushes, time.perf_counter() - t0)


def dijkstra(graph: RoadmapGraph, objective_id: str, start: int, goal: int,
             workspace: SearchWorkspace | None = None) -> SearchResult:
    return astar(graph, objective_id, start, goal, ZeroHeuristic(), workspace)


def path_cost(graph: RoadmapGraph, objective_id: str, path) -> float:
    w = graph.weights(objective_id)
    total = 0.0
    for a, b in zip(path[:-1], path[1:]):
        row = graph.neighbors_of(a)
        i = np.searchsorted(row, b)
        if i >= len(row) or row[i] != b:
            raise ValueError(f"{a} -> {b} is not an edge")
        total += w[graph.offsets[a] + i]
    return total
