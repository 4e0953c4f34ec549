import math

import numpy as np
import pytest

from lmprm import audit
from lmprm.errors import FingerprintMismatch, FormatError
from lmprm.landmarks import (INCOMING, LandmarkHeuristic, build_landmark_table,
                             heuristic_quality, landmark_heuristic, load_table, save_table,
                             select_landmarks, sssp, table_from_bytes, table_to_bytes)
from lmprm.roadmap import LENGTH, WORK, build_prm, graph_from_edges
from lmprm.search import astar, dijkstra

from conftest import bellman_ford, empty_env, graph_edges


@pytest.fixture(scope="module")
def line():
    V = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    return graph_from_edges(V, np.array([[0, 1], [1, 2]]), (LENGTH, WORK))


@pytest.fixture(scope="module")
def two_islands():
    """Two disconnected triangles with vertical edges so "work" is asymmetric."""
    V = np.array([[0, 0], [0.1, 0.1], [0.2, 0], [1, 0], [1.1, 0.1], [1.2, 0]], dtype=float)
    E = np.array([[0, 1], [1, 2], [0, 2], [3, 4], [4, 5], [3, 5]])
    return graph_from_edges(V, E, (LENGTH, WORK))


@pytest.fixture(scope="module")
def tables(forest_graph):
    rng = np.random.default_rng(5)
    ids = select_landmarks(forest_graph, 20, rng)
    return {oid: build_landmark_table(forest_graph, oid, ids) for oid in ("length", "work")}


# -- selection ----------------------------------------------------------------


def test_select_all_and_one(small_graph):
    rng = np.random.default_rng(0)
    assert select_landmarks(small_graph, small_graph.n, rng).tolist() == list(range(small_graph.n))
    single = graph_from_edges(np.zeros((1, 2)), np.zeros((0, 2)), (LENGTH,))
    assert select_landmarks(single, 1, rng).tolist() == [0]


def test_select_sorted_distinct(forest_graph):
    ids = select_landmarks(forest_graph, 100, np.random.default_rng(1))
    assert np.all(np.diff(ids) > 0)


def test_select_range(small_graph):
    rng = np.random.default_rng(0)
    for k in (0, small_graph.n + 1):
        with pytest.raises(ValueError):
            select_landmarks(small_graph, k, rng)


def test_select_uniform():
    g = graph_from_edges(np.random.default_rng(0).random((10, 2)), np.zeros((0, 2)), (LENGTH,))
    rng = np.random.default_rng(2)
    counts = np.bincount([select_landmarks(g, 1, rng)[0] for _ in range(10_000)], minlength=10)
    sigma = math.sqrt(10_000 * 0.1 * 0.9)
    assert np.all(np.abs(counts - 1000) <= 3 * sigma)


# -- sssp ---------------------------------------------------------------------


def test_sssp_line(line):
    assert sssp(line, "length", 0).tolist() == [0.0, 1.0, 2.0]
    assert sssp(line, "length", 1)[1] == 0.0


def test_sssp_bad_args(line):
    with pytest.raises(ValueError):
        sssp(line, "length", 0, "sideways")
    with pytest.raises(IndexError):
        sssp(line, "length", 7)
    with pytest.raises(KeyError):
        sssp(line, "energy", 0)


@pytest.mark.parametrize("oid", ["length", "work"])
def test_sssp_matches_bellman_ford(forest, oid):
    g = build_prm(forest, 200, (LENGTH, WORK), seed=21)
    src, dst, w = graph_edges(g, oid)
    for s in range(0, 200, 17):
        assert np.allclose(sssp(g, oid, s), bellman_ford(200, src, dst, w, s), rtol=1e-12,
                           atol=0)
        # incoming: Bellman-Ford on the transposed edge list
        assert np.allclose(sssp(g, oid, s, INCOMING), bellman_ford(200, dst, src, w, s),
                           rtol=1e-12, atol=0)


# -- tables -------------------------------------------------------------------


def test_table_rows_equal_sssp(forest_graph, tables):
    for oid, t in tables.items():
        assert t.graph_fingerprint == forest_graph.fingerprint
        assert t.k == 20 and t.n == forest_graph.n
        for i, l in enumerate(t.landmark_ids):
            assert np.array_equal(t.dist_to[i], sssp(forest_graph, oid, int(l)))
            assert np.array_equal(t.dist_from[i], sssp(forest_graph, oid, int(l), INCOMING))
            assert t.dist_to[i, l] == 0.0
        assert np.all(t.dist_to >= 0)
    assert tables["length"].symmetric and not tables["work"].symmetric


def test_triangle_audit(forest_graph, tables):
    rng = np.random.default_rng(3)
    for oid, t in tables.items():
        for _ in range(20):
            u, v = (int(x) for x in rng.integers(forest_graph.n, size=2))
            d_vu = sssp(forest_graph, oid, v)[u]
            lhs, rhs = t.dist_to[:, u], t.dist_to[:, v] + d_vu
            ok = np.isinf(rhs) | (lhs <= rhs + 1e-9 * np.maximum(rhs, 1))
            assert ok.all()


def test_empty_table_is_dijkstra(forest_graph):
    t = build_landmark_table(forest_graph, "length", [])
    assert t.k == 0
    h = landmark_heuristic(t, 5)
    assert h.evaluate(0) == 0.0 and np.all(h.evaluate_all() == 0)
    for s, g in ((0, 5), (17, 300)):
        a, b = astar(forest_graph, "length", s, g, h), dijkstra(forest_graph, "length", s, g)
        assert (a.iterations, a.cost) == (b.iterations, b.cost)


def test_landmark_at_goal_is_exact(forest_graph):
    rng = np.random.default_rng(4)
    for oid in ("length", "work"):
        for _ in range(10):
            s, g = (int(v) for v in rng.integers(forest_graph.n, size=2))
            t = build_landmark_table(forest_graph, oid, [g])
            h = landmark_heuristic(t, g)
            d = sssp(forest_graph, oid, g, INCOMING)
            for x in rng.integers(forest_graph.n, size=30):
                if np.isfinite(d[x]):
                    assert h.evaluate(int(x)) == pytest.approx(d[x], rel=1e-12, abs=1e-15)
            res = astar(forest_graph, oid, s, g, h)
            if res.found and oid == "length":
                assert res.iterations == len(res.path)


def test_goal_scores_zero(tables):
    for t in tables.values():
        for g in (0, 99, 500):
            assert LandmarkHeuristic(t, g).evaluate(g) == 0.0


def test_build_checks_ids(small_graph):
    with pytest.raises(IndexError):
        build_landmark_table(small_graph, "length", [small_graph.n])


# -- heuristic values -----------------------------------------------------------


def test_hand_example_symmetric(line):
    t = build_landmark_table(line, "length", [0])
    h = landmark_heuristic(t, 2)
    assert [h.evaluate(x) for x in range(3)] == [2.0, 1.0, 0.0]


def test_hand_example_asymmetric():
    # 0 at the bottom, 1 on top: climbing 0->1 costs 1 + 5, descending costs 1
    V = np.array([[0.0, 0.0], [0.0, 1.0]])
    g = graph_from_edges(V, np.array([[0, 1]]), (WORK,))
    t = build_landmark_table(g, "work", [0])
    assert t.dist_to.tolist() == [[0.0, 6.0]]
    assert t.dist_from.tolist() == [[0.0, 1.0]]
    assert landmark_heuristic(t, 1).evaluate(0) == 6.0   # d(l,g) - d(l,x) = 6 - 0
    assert landmark_heuristic(t, 0).evaluate(1) == 1.0   # d(x,l) - d(g,l) = 1 - 0


def test_infinity_handling(two_islands):
    for oid in ("length", "work"):
        t = build_landmark_table(two_islands, oid, [0])
        # x and goal on the far island: both distances infinite, the landmark says nothing
        assert landmark_heuristic(t, 4).evaluate(3) == 0.0
        # exactly one side infinite proves disconnection
        assert landmark_heuristic(t, 4).evaluate(1) == math.inf
        assert landmark_heuristic(t, 1).evaluate(4) == math.inf
        res = astar(two_islands, oid, 1, 4, landmark_heuristic(t, 4))
        assert not res.found and res.iterations == 0
        res = astar(two_islands, oid, 3, 4, landmark_heuristic(t, 4))
        assert res.found


def test_evaluate_all_matches_scalar(forest_graph, tables):
    rng = np.random.default_rng(6)
    for t in tables.values():
        for g in rng.integers(forest_graph.n, size=5):
            h = LandmarkHeuristic(t, int(g))
            full = h.evaluate_all()
            for x in rng.integers(forest_graph.n, size=50):
                assert full[x] == h.evaluate(int(x))


@pytest.mark.parametrize("oid", ["length", "work"])
def test_admissible(forest_graph, tables, oid):
    rng = np.random.default_rng(8)
    t = tables[oid]
    checked = 0
    for g in rng.integers(forest_graph.n, size=20):
        d = sssp(forest_graph, oid, int(g), INCOMING)
        h = LandmarkHeuristic(t, int(g)).evaluate_all()
        xs = rng.integers(forest_graph.n, size=50)
        for x in xs:
            if np.isinf(d[x]):
                continue
            assert h[x] <= d[x] + 1e-9 * max(d[x], 1.0)
            checked += 1
    assert checked > 500


def test_consistent_symmetric(forest_graph, tables):
    res = audit.audit_table(tables["length"], forest_graph, np.random.default_rng(0), goals=10)
    assert all(r.ok for r in res), [r.line() for r in res]
    assert "landmark_consistent" in {r.name for r in res}
    res = audit.audit_table(tables["work"], forest_graph, np.random.default_rng(0), goals=10)
    assert all(r.ok for r in res), [r.line() for r in res]


def test_monotone_in_landmarks(forest_graph):
    rng = np.random.default_rng(9)
    ids = rng.permutation(forest_graph.n)[:40]
    for oid in ("length", "work"):
        small = build_landmark_table(forest_graph, oid, ids[:10])
        big = build_landmark_table(forest_graph, oid, ids)
        for g in rng.integers(forest_graph.n, size=10):
            a = LandmarkHeuristic(small, int(g)).evaluate_all()
            b = LandmarkHeuristic(big, int(g)).evaluate_all()
            assert np.all(b >= a)


@pytest.mark.parametrize("oid", ["length", "work"])
def test_landmark_astar_optimal(forest_graph, tables, oid):
    rng = np.random.default_rng(10)
    for _ in range(40):
        s, g = (int(v) for v in rng.integers(forest_graph.n, size=2))
        a = astar(forest_graph, oid, s, g, landmark_heuristic(tables[oid], g, forest_graph))
        b = dijkstra(forest_graph, oid, s, g)
        assert a.status == b.status
        if b.found:
            assert a.cost == b.cost or abs(a.cost - b.cost) <= 1e-9 * b.cost
            assert a.iterations <= b.iterations


# -- quality ------------------------------------------------------------------


def test_quality_all_landmarks(small_graph):
    t = build_landmark_table(small_graph, "length", np.arange(small_graph.n))
    q = heuristic_quality(t, small_graph, "length", 200, np.random.default_rng(0))
    assert q.mean == 1.0 and q.min == 1.0 and q.pairs == 200


def test_quality_no_landmarks(small_graph):
    t = build_landmark_table(small_graph, "length", [])
    q = heuristic_quality(t, small_graph, "length", 100, np.random.default_rng(0))
    assert q.mean == 0.0


def test_quality_grows_with_k():
    g = build_prm(empty_env(), 2000, seed=12)
    means = []
    for k in (10, 50, 90, 130, 170):
        vals = []
        for seed in range(5):
            rng = np.random.default_rng(seed)
            t = build_landmark_table(g, "length", select_landmarks(g, k, rng))
            vals.append(heuristic_quality(t, g, "length", 100, np.random.default_rng(100 + seed)).mean)
        means.append(np.mean(vals))
    assert all(b >= a for a, b in zip(means, means[1:]))
    assert means[-1] > means[0]


def test_quality_counts_skips(two_islands):
    t = build_landmark_table(two_islands, "length", [0])
    q = heuristic_quality(t, two_islands, "length", 30, np.random.default_rng(1))
    assert q.pairs == 30 and q.skipped > 0
    assert 0.0 <= q.min <= q.mean <= 1.0


# -- LMRK files -------------------------------------------------------------------


def test_table_round_trip(tmp_path, forest_graph, tables):
    for oid, t in tables.items():
        path = tmp_path / f"{oid}.lmrk"
        save_table(t, path)
        back = load_table(path, forest_graph)
        assert table_to_bytes(back) == path.read_bytes()
        assert np.array_equal(back.dist_to, t.dist_to)
        assert np.array_equal(back.dist_from, t.dist_from)
        assert back.symmetric == t.symmetric
        assert back.landmark_ids.tolist() == t.landmark_ids.tolist()


def test_table_size(forest):
    g = build_prm(forest, 10_000, (LENGTH, WORK), seed=1)
    ids = select_landmarks(g, 10, np.random.default_rng(0))
    sym = table_to_bytes(build_landmark_table(g, "length", ids))
    asym = table_to_bytes(build_landmark_table(g, "work", ids))
    assert abs(len(sym) - 8 * 10 * g.n) <= 0.1 * 8 * 10 * g.n
    assert abs(len(asym) - 2 * 8 * 10 * g.n) <= 0.1 * 2 * 8 * 10 * g.n
    assert len(sym) - 800_000 < 200


def test_table_unreachable_round_trip(two_islands):
    t = build_landmark_table(two_islands, "work", [0, 4])
    back = table_from_bytes(table_to_bytes(t), two_islands)
    assert np.isinf(back.dist_to).sum() == 6
    assert np.array_equal(back.dist_to, t.dist_to)


def test_table_errors(forest_graph, small_graph, tables):
    buf = table_to_bytes(tables["work"])
    with pytest.raises(FingerprintMismatch):
        table_from_bytes(buf, small_graph)
    with pytest.raises(FingerprintMismatch):
        landmark_heuristic(tables["work"], 0, small_graph)
    with pytest.raises(FormatError, match="magic"):
        table_from_bytes(b"LMRX" + buf[4:])
    with pytest.raises(FormatError, match="truncated"):
        table_from_bytes(buf[:-100])
    bad = bytearray(buf)
    bad[-50] ^= 0x80
    with pytest.raises(FormatError, match="checksum"):
        table_from_bytes(bytes(bad))
