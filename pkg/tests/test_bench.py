import numpy as np
import pytest

from nngpcg.bench import (
    PLOT_HEADER,
    BenchConfig,
    BenchRow,
    assign_relatives,
    default_grid,
    desk_grid,
    emit_plot_data,
    emit_table,
    parse_table_csv,
    plot_files,
    run_benchmark,
    summed_rows,
    timeout_note,
    write_outputs,
)
from nngpcg.posterior import METHODS

DELTAS = [0.001, 0.01, 0.1, 1.0]


def small_cfg(**kw):
    base = dict(sizes=[80], delta2_grid=[0.01, 1.0], methods=["cg", "jacobi", "ic0", "dense"], replications=2)
    base.update(kw)
    return BenchConfig(**base)


def test_grids():
    g = default_grid()
    assert g.sizes == [1000, 10000, 100000, 1000000]
    assert g.replications == [10000, 1000, 100, 10]
    assert g.delta2_grid == DELTAS and g.m == 10 and g.phi == 7.0 and g.timeout == 600.0
    assert g.methods == list(METHODS)
    d = desk_grid()
    assert d.sizes == [1000, 10000] and d.replications == [100, 10]
    assert d.reps_for(10000) == 10
    assert default_grid() == default_grid()


@pytest.mark.parametrize("kw", [{"methods": []}, {"methods": ["bogus"]}, {"sizes": [1]}, {"delta2_grid": [0.0]},
                                {"replications": [1, 2]}, {"replications": 0}, {"timeout": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        small_cfg(**kw)


def test_single_method_relative_one():
    rows = assign_relatives([BenchRow("cgsparse", 1000, 0.01, 10, 4.2)])
    assert rows[0].relative == 1.0
    assert "| cgsparse | 1.000 | 4.200 |" in emit_table(rows, view="per-delta2")


def test_published_elapsed_pair():
    rows = assign_relatives([BenchRow("cgsparse", 1000, 0.01, 10000, 7.003),
                             BenchRow("dense", 1000, 0.01, 10000, 3.683)])
    assert [r.relative for r in rows] == [pytest.approx(7.003 / 3.683), 1.0]
    text = emit_table(rows, view="per-delta2")
    assert "| cgsparse | 1.901 | 7.003 |" in text
    assert "| dense | 1.000 | 3.683 |" in text


def test_relatives_skip_non_ok_rows():
    rows = assign_relatives([BenchRow("a", 5, 0.1, 1, 2.0), BenchRow("b", 5, 0.1, 1, None, status="timeout"),
                             BenchRow("c", 5, 0.1, 1, None, status="error"), BenchRow("d", 5, 0.1, 1, 3.0),
                             BenchRow("a", 6, 0.1, 1, 9.0)])
    assert [r.relative for r in rows] == [1.0, None, None, 1.5, 1.0]
    with pytest.raises(ValueError):
        BenchRow("a", 5, 0.1, 1, 1.0, status="weird")


def test_timeout_note():
    assert timeout_note(600) == "more than 10 mins"
    assert timeout_note(60) == "more than 1 min"
    assert timeout_note(20) == "more than 20 s"
    assert timeout_note(1e-6) == "more than 1e-06 s"


def test_timeout_rows_render():
    rows = [BenchRow("dense", 10000, 0.1, 10, None, status="timeout", note="stopped"),
            BenchRow("cgsparse", 10000, 0.1, 10, 1.0)]
    text = emit_table(assign_relatives(rows), view="per-delta2", timeout=600)
    assert "| dense |  | more than 10 mins |" in text
    assert "| cgsparse | 1.000 | 1.000 |" in text


def test_run_forced_timeout():
    cfg = small_cfg(timeout=1e-6)
    rows = run_benchmark(cfg)
    assert len(rows) == 8
    assert all(r.status == "timeout" and r.relative is None for r in rows)
    assert all(r.status == "timeout" for r in summed_rows(rows))


def test_run_small_grid():
    rows = run_benchmark(small_cfg())
    assert len(rows) == 8 and all(r.status == "ok" for r in rows)
    for d2 in (0.01, 1.0):
        grp = [r for r in rows if r.delta2 == d2]
        rels = [r.relative for r in grp]
        assert rels.count(1.0) >= 1 and min(rels) == 1.0 and all(x >= 1.0 for x in rels)
        best = min(grp, key=lambda r: r.elapsed_total)
        assert best.relative == 1.0
    again = run_benchmark(small_cfg())
    assert [(r.method, r.n, r.delta2, r.status) for r in again] == [(r.method, r.n, r.delta2, r.status) for r in rows]


def test_run_single_method():
    rows = run_benchmark(small_cfg(methods=["jacobi"], delta2_grid=[0.1]))
    assert len(rows) == 1 and rows[0].relative == 1.0 and rows[0].method == "jacobi-pcg"


def test_dense_refusal_becomes_error_row(monkeypatch):
    import nngpcg.solvers as solvers

    monkeypatch.setattr(solvers, "DENSE_MAX_N", 10)
    rows = run_benchmark(small_cfg(delta2_grid=[0.1]))
    by = {r.method: r for r in rows}
    assert by["dense"].status == "error" and by["dense"].relative is None
    assert by["cgsparse"].status == "ok"
    assert min(r.relative for r in rows if r.status == "ok") == 1.0


def test_summed_view():
    rows = assign_relatives([BenchRow("a", 5, 0.1, 2, 1.0), BenchRow("b", 5, 0.1, 2, 2.0),
                             BenchRow("a", 5, 1.0, 2, 3.0), BenchRow("b", 5, 1.0, 2, 1.0)])
    s = summed_rows(rows)
    assert [(r.method, r.elapsed_total, r.delta2) for r in s] == [("a", 4.0, None), ("b", 3.0, None)]
    assert [r.relative for r in s] == [pytest.approx(4 / 3), 1.0]
    text = emit_table(rows, view="both")
    assert "per-delta2" in text and "delta2-summed" in text and "machine:" in text
    with pytest.raises(ValueError):
        emit_table(rows, view="nope")


def test_csv_round_trip():
    rows = assign_relatives([BenchRow("cgsparse", 1000, 0.01, 10, 7.003), BenchRow("dense", 1000, 0.01, 10, 3.683),
                             BenchRow("cgls", 1000, 0.01, 10, None, status="timeout")])
    back = parse_table_csv(emit_table(rows, "csv", view="per-delta2", timeout=600))
    assert [(d["method"], d["relative"], d["elapsed"], d["status"]) for d in back] == [
        ("cgsparse", "1.901", "7.003", "ok"), ("dense", "1.000", "3.683", "ok"),
        ("cgls", "", "more than 10 mins", "timeout")]
    assert float(back[0]["delta2"]) == 0.01 and back[0]["view"] == "per-delta2"


def test_plot_files():
    rows = assign_relatives([BenchRow(m, n, d, 1, float(i + 1)) for i, (m, n, d) in
                             enumerate((m, n, d) for d in DELTAS for n in (10, 20) for m in ("a", "b"))])
    files = plot_files(rows)
    assert sorted(files) == sorted(f"plot_delta{d:g}.csv" for d in DELTAS)
    assert emit_plot_data([]).strip() == ",".join(PLOT_HEADER)
    table = {(d["method"], d["n"], float(d["delta2"])): d
             for d in parse_table_csv(emit_table(rows, "csv", view="per-delta2"))}
    for d in DELTAS:
        for rec in parse_table_csv(files[f"plot_delta{d:g}.csv"]):
            t = table[(rec["method"], rec["n"], float(rec["delta2"]))]
            assert rec["elapsed"] == t["elapsed"] and rec["relative"] == t["relative"]


def test_write_outputs(tmp_path):
    rows = run_benchmark(small_cfg(methods=["cg", "cholesky"], replications=1))
    paths = write_outputs(rows, tmp_path / "out", timeout=600, stamp="x")
    names = sorted(p.name for p in paths)
    assert names == ["bench_x.csv", "bench_x.md", "plot_delta0.01.csv", "plot_delta1.csv"]
    assert len(parse_table_csv((tmp_path / "out" / "bench_x.csv").read_text())) == 4 + 2
    assert np.all([p.exists() for p in paths])
