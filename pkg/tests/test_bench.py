import csv
import json

import numpy as np
import pytest

from lmprm import bench
from lmprm.bench import (CSV_COLUMNS, TAG_GRAPH, TAG_QUERY, TAG_TABLE, ExperimentSpec,
                         HarnessError, derive_seed, emit_report, run, run_methods)
from lmprm.env import point_free
from lmprm.landmarks import build_landmark_table, select_landmarks
from lmprm.roadmap import build_prm, get_objective
from lmprm.search import dijkstra


@pytest.fixture(scope="module")
def fraction_records():
    spec = ExperimentSpec.desk("fraction_sweep", seed=3, graph_sizes=(1500,),
                               landmark_counts=(5, 20), repetitions=3,
                               objective_ids=("length", "work"), mc_pairs=20_000)
    return spec, run(spec)


def test_csv_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_report([], path)
    assert path.read_text() == ",".join(CSV_COLUMNS) + "\n"
    assert len(CSV_COLUMNS) == 18
    assert json.loads(path.with_suffix(".summary.json").read_text()) == []


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("nope")
    with pytest.raises(ValueError):
        ExperimentSpec("bugtrap", queries=0)
    with pytest.raises(ValueError):
        ExperimentSpec("bugtrap", landmark_counts=(0,))
    assert ExperimentSpec.desk("fraction_sweep").graph_sizes == (10_000, 20_000, 40_000)
    assert ExperimentSpec.paper("clutter_sweep").environments == 100


def test_derive_seed_stable():
    assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
    assert len({derive_seed(1, 2, k) for k in range(100)}) == 100
    assert derive_seed(1, 2) != derive_seed(2, 2)
    assert 0 <= derive_seed(7, 1) < 2**63


def test_records_agree_and_rows(fraction_records, tmp_path):
    spec, records = fraction_records
    assert len(records) == 2 * 2 * 3
    for r in records:
        assert [m.method for m in r.methods] == ["dijkstra", "euclidean", f"landmark:{r.methods[2].k}"]
        costs = [m.cost for m in r.methods]
        assert all(abs(c - costs[0]) <= 1e-9 * costs[0] for c in costs)
        assert all(m.status == "found" for m in r.methods)
    path = tmp_path / "f.csv"
    emit_report(records, path)
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 3 * len(records)
    assert all(len(row) == 18 for row in rows)
    assert {row["scenario"] for row in rows} == {"fraction_sweep", "fraction_sweep:work"}
    assert all(row["wall_time_us"] == "" for row in rows)


def test_cell_reproducible_from_recorded_seeds(fraction_records):
    """Rebuild one landmark cell from the seeds in its record alone."""
    spec, records = fraction_records
    rec = records[-1]
    env, _, _ = bench.clutter_environment(spec.p_clear[0], spec.obstacle_radius,
                                          spec.master_seed, 0, 0, spec.mc_pairs)
    assert rec.env_seed == env.seed
    graph = build_prm(env, rec.n, [get_objective(o) for o in spec.objective_ids],
                      seed=rec.graph_seed)
    lm = rec.methods[2]
    assert rec.graph_seed == derive_seed(spec.master_seed, TAG_GRAPH, rec.n)
    assert rec.query_seed == derive_seed(spec.master_seed, TAG_QUERY, rec.n, lm.k, rec.query_idx)
    assert lm.table_seed == derive_seed(spec.master_seed, TAG_TABLE, rec.n, lm.k, rec.query_idx)
    s, g, resamples = bench.sample_connected_query(bench.components(graph),
                                                   np.random.default_rng(rec.query_seed))
    assert (s, g, resamples) == (rec.start, rec.goal, rec.resamples)
    ids = select_landmarks(graph, lm.k, np.random.default_rng(lm.table_seed))
    table = build_landmark_table(graph, rec.objective_id, ids, lm.table_seed)
    again = run_methods(graph, rec.objective_id, s, g, [(lm.k, lm.table_seed, table)])
    assert [(m.method, m.iterations, m.pushes, m.cost) for m in again] == \
        [(m.method, m.iterations, m.pushes, m.cost) for m in rec.methods]


def test_byte_identical_csv(tmp_path):
    spec = ExperimentSpec.desk("clutter_sweep", seed=5, p_clear=(0.1, 0.9), environments=2,
                               queries=3, graph_sizes=(800,), landmark_counts=(4, 16),
                               mc_pairs=10_000)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_report(run(spec), a)
    emit_report(run(spec), b)
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert {float(r["p_clear"]) for r in rows} == {0.1, 0.9}
    assert len(rows) == 2 * 2 * 3 * 4


def test_threads_do_not_change_output(tmp_path):
    kw = dict(seed=6, p_clear=(0.3,), environments=3, queries=2, graph_sizes=(600,),
              landmark_counts=(8,), mc_pairs=10_000)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_report(run(ExperimentSpec.desk("clutter_sweep", **kw)), a)
    emit_report(run(ExperimentSpec.desk("clutter_sweep", threads=3, **kw)), b)
    assert a.read_bytes() == b.read_bytes()


def test_bugtrap_ordering(tmp_path):
    records = run(ExperimentSpec.desk("bugtrap", seed=0, repetitions=2))
    assert len(records) == 2
    for r in records:
        dj, eu, lm = (r.method(m).iterations for m in ("dijkstra", "euclidean", "landmark:100"))
        assert lm < eu <= 1.01 * dj
    path = tmp_path / "bt.csv"
    emit_report(records, path, include_timing=True)
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 6 and all(row["wall_time_us"] != "" for row in rows)
    assert rows[2]["preprocess_time_us"] != "" and rows[0]["preprocess_time_us"] == ""


def test_bugtrap_asset():
    env, start, goal = bench.load_bugtrap()
    assert point_free(env, start) and point_free(env, goal)
    assert 0.1 < env.mu_free < 1.0


def test_summary_cells(fraction_records, tmp_path):
    _, records = fraction_records
    summary = emit_report(records, tmp_path / "s.csv")
    dij = [row for row in summary if row["method"] == "dijkstra"]
    assert all(row["median_dijkstra_ratio"] == 1.0 for row in dij)
    assert {row["method"] for row in summary} == {"dijkstra", "euclidean", "landmark:5",
                                                  "landmark:20"}


def test_harness_catches_wrong_cost(small_graph):
    """A doctored table that overestimates must trip the cost cross-check."""
    ids = select_landmarks(small_graph, 3, np.random.default_rng(0))
    good = build_landmark_table(small_graph, "length", ids)
    bad = type(good)(good.objective_id, good.landmark_ids, good.dist_to * 3.0,
                     good.dist_to * 3.0, good.graph_fingerprint)
    comp = bench.components(small_graph)
    rng = np.random.default_rng(1)
    with pytest.raises(HarnessError):
        for _ in range(200):
            s, g, _ = bench.sample_connected_query(comp, rng)
            if dijkstra(small_graph, "length", s, g).iterations > 5:
                run_methods(small_graph, "length", s, g, [(3, 0, bad)])
