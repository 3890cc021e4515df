from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from wormhole_dtn import Protocol
from wormhole_dtn.config import ConfigError
from wormhole_dtn.harness import (
    ExperimentMatrix, ResultRow, read_csv, rows_to_csv, run_matrix, summarize, sweep, worker_count, write_report,
)

from conftest import small_config

BASE = small_config(duration=900.0)


def tiny_matrix(**kw):
    kw.setdefault("node_totals", (12, 14, 16, 18))
    kw.setdefault("seeds", (1,))
    return ExperimentMatrix(base_config=BASE, **kw)


@pytest.fixture(scope="module")
def rows16():
    return run_matrix(tiny_matrix())


def test_cardinality(rows16):
    assert len(rows16) == 16
    keys = [(r.node_total, r.protocol, r.seed) for r in rows16]
    assert len(set(keys)) == 16
    assert {r.node_total for r in rows16} == {12, 14, 16, 18}


def test_duplicate_seed_duplicate_rows():
    rows = run_matrix(tiny_matrix(node_totals=(14,), protocols=("epidemic",), seeds=(3, 3)))
    assert rows[0].outcome() == rows[1].outcome()


def test_default_matrix_shape():
    m = ExperimentMatrix()
    assert m.node_totals == (58, 64, 70, 76) and len(m.protocols) == 4 and m.seeds == (1, 2, 3, 4, 5)
    cells = m.cells()
    assert len(cells) == 80 and {c.num_nodes for c in cells} == {58, 64, 70, 76}


def test_invalid_cell_rejects_whole_matrix():
    ran = []
    with pytest.raises(ConfigError):
        sweep(tiny_matrix(node_totals=(12, 4)), inspect=lambda t, r: ran.append(1))
    assert ran == []


def test_empty_matrix_rejected():
    with pytest.raises(ConfigError):
        tiny_matrix(seeds=()).cells()


def test_parallel_merge_matches_serial(rows16):
    rows = run_matrix(tiny_matrix(node_totals=(12, 14)), workers=2)
    assert [r.outcome() for r in rows] == [r.outcome() for r in rows16[:8]]


def test_worker_env(monkeypatch):
    monkeypatch.setenv("WDTN_WORKERS", "3")
    assert worker_count() == 3
    assert worker_count(2) == 2


def test_rows_respect_bounds(rows16):
    for r in rows16:
        assert 0 <= r.true_detections <= r.preset_pairs
        assert 0 <= r.success_rate <= 100 and 0 <= r.false_alarm_rate <= 100


def test_csv_round_trip(rows16):
    text = rows_to_csv(rows16)
    assert read_csv(text) == rows16
    assert rows_to_csv(read_csv(text)) == text


def test_csv_rejects_foreign_header():
    with pytest.raises(ValueError):
        read_csv("a,b\n1,2\n")


def row(success, proto=Protocol.EPIDEMIC, total=58, seed=1, timeline=()):
    return ResultRow(total, proto, seed, 5, round(success / 20), 0, success, 0.0, 1000.0, 1.0, list(timeline))


def test_single_row_summary():
    s = summarize([row(80.0)]).cells[(Protocol.EPIDEMIC, 58)]
    assert s.mean["success_rate"] == 80.0 and s.std["success_rate"] == 0.0


def test_mean_of_two():
    s = summarize([row(80.0), row(100.0, seed=2)]).cells[(Protocol.EPIDEMIC, 58)]
    assert s.mean["success_rate"] == 90.0 and s.runs == 2


def test_empty_rows_rejected():
    with pytest.raises(ValueError):
        summarize([])


@settings(max_examples=50)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=10))
def test_summary_mean_within_row_range(rates):
    rows = [row(x, seed=i) for i, x in enumerate(rates)]
    s = summarize(rows).cells[(Protocol.EPIDEMIC, 58)]
    assert min(rates) - 1e-9 <= s.mean["success_rate"] <= max(rates) + 1e-9


def test_series_is_cumulative(rows16):
    tables = summarize(rows16)
    assert len(tables.series) == 16
    for pts in tables.series.values():
        rates = [r for _, r in pts]
        assert rates == sorted(rates)


def test_report_files(tmp_path, rows16):
    write_report(rows16, tmp_path)
    summary = (tmp_path / "summary.csv").read_text().splitlines()
    assert len(summary) == 1 + 16
    assert (tmp_path / "series.csv").read_text().startswith("protocol,node_total,seed,time,success_rate")
