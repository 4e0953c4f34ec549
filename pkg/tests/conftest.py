import math

import numpy as np
import pytest

from lmprm.env import Box, Circle, Environment, Rect, poisson_forest
from lmprm.roadmap import LENGTH, WORK, build_prm


# --------------------------------------------------------------------------
# independent oracles (plain python / numpy, no shared code with the package)


def bellman_ford(n, src, dst, w, source):
    """Textbook Bellman-Ford over an edge list; returns distances (inf = unreachable)."""
    dist = np.full(n, math.inf)
    dist[source] = 0.0
    for _ in range(n):
        cand = dist[src] + w
        new = dist.copy()
        np.minimum.at(new, dst, cand)
        if np.array_equal(new, dist):
            break
        dist = new
    return dist


def graph_edges(graph, objective_id):
    return graph.edge_sources, graph.neighbors, graph.weights(objective_id)


def brute_point_free(env, x):
    lo, hi = env.free_bounds.lo, env.free_bounds.hi
    if not all(a < v < b for a, v, b in zip(lo, x, hi)):
        return False
    for ob in env.obstacles:
        if isinstance(ob, Circle):
            if sum((a - b) ** 2 for a, b in zip(x, ob.center)) <= ob.radius**2:
                return False
        elif all(a <= v <= b for a, v, b in zip(ob.min, x, ob.max)):
            return False
    return True


def brute_points_free(env, X):
    """Vectorised membership test written independently of the package kernels."""
    X = np.asarray(X, dtype=float)
    lo, hi = np.array(env.free_bounds.lo), np.array(env.free_bounds.hi)
    ok = np.all((X > lo) & (X < hi), axis=1)
    for ob in env.obstacles:
        if isinstance(ob, Circle):
            ok &= np.sum((X - np.array(ob.center)) ** 2, axis=1) > ob.radius**2
        else:
            ok &= ~np.all((X >= np.array(ob.min)) & (X <= np.array(ob.max)), axis=1)
    return ok


def brute_segment_clear(env, p, q, steps=4000):
    """Dense sampling of the segment; only trustworthy away from grazing contacts."""
    t = np.linspace(0.0, 1.0, steps)[:, None]
    return bool(brute_points_free(env, p + t * (q - p)).all())


# --------------------------------------------------------------------------
# fixtures


def empty_env(dim=2):
    return Environment(dim, Box.cube(0.5, dim), Box.cube(0.5, dim))


@pytest.fixture(scope="session")
def empty2():
    return empty_env(2)


@pytest.fixture(scope="session")
def forest():
    return poisson_forest(60.0, 0.05, np.random.default_rng(7), mu_samples=20_000, seed=7)


@pytest.fixture(scope="session")
def wall_env():
    return Environment(2, Box.cube(0.5, 2), Box.cube(0.5, 2),
                       (Rect((-0.05, -0.5), (0.05, 0.5)),))


@pytest.fixture(scope="session")
def forest_graph(forest):
    return build_prm(forest, 1000, (LENGTH, WORK), seed=11)


@pytest.fixture(scope="session")
def small_graph(forest):
    return build_prm(forest, 300, (LENGTH, WORK), seed=3)


# --------------------------------------------------------------------------
# acceptance report: one line per criterion in the terminal summary

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
