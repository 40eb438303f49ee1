import csv

import numpy as np
import pytest

from nngpcg.bench import parse_table_csv
from nngpcg.cli import EXIT_DATA, EXIT_NUMERIC, EXIT_OK, EXIT_USAGE, main


def write_system(tmp_path, a, b, name="sys"):
    a = np.asarray(a, dtype=float)
    mp, bp = tmp_path / f"{name}_a.csv", tmp_path / f"{name}_b.csv"
    with mp.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["row", "col", "value"])
        for i, j in zip(*np.nonzero(a)):
            w.writerow([i, j, repr(float(a[i, j]))])
    with bp.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["value"])
        for v in b:
            w.writerow([repr(float(v))])
    return str(mp), str(bp)


def solution(out):
    lines = out.strip().splitlines()
    assert lines[0] == "value"
    return np.array([float(v) for v in lines[1:]])


def simulate(tmp_path, name="d.csv", n=500, seed=3):
    out = tmp_path / name
    assert main(["simulate", "--n", str(n), "--seed", str(seed), "--out", str(out)]) == EXIT_OK
    return out


def test_help_and_usage(capsys):
    assert main(["--help"]) == EXIT_OK
    assert main([]) == EXIT_USAGE
    assert main(["simulate", "--out", "x.csv"]) == EXIT_USAGE


def test_simulate_deterministic_and_prints_config(tmp_path, capsys):
    a = simulate(tmp_path, "a.csv", n=50)
    err = capsys.readouterr().err
    assert "config:" in err and '"seed": 3' in err
    b = simulate(tmp_path, "b.csv", n=50)
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.truth.csv").read_text() == (tmp_path / "b.truth.csv").read_text()
    header = a.read_text().splitlines()[0]
    assert header == "coord_x,coord_y,y,x1"
    assert len(a.read_text().splitlines()) == 51


def test_simulate_without_seed_reports_one(tmp_path, capsys):
    assert main(["simulate", "--n", "5", "--out", str(tmp_path / "s.csv")]) == EXIT_OK
    assert "seed:" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [["--n", "0"], ["--n", "5", "--delta2", "0"], ["--n", "5", "--beta", "1,2,3"]])
def test_simulate_bad_arguments(tmp_path, extra):
    assert main(["simulate", *extra, "--out", str(tmp_path / "s.csv")]) == EXIT_USAGE


def fit_args(data, out, *extra):
    return ["fit", "--data", str(data), "--coord-x-col", "coord_x", "--coord-y-col", "coord_y", "--y-col", "y",
            "--x-cols", "x1", "--delta2", "0.01", "--seed", "11", "--out", str(out), *extra]


def test_fit_end_to_end(tmp_path, capsys):
    data = simulate(tmp_path)
    assert main(fit_args(data, tmp_path / "r1", "--draws", "20")) == EXIT_OK
    out = capsys.readouterr().out
    assert "a_star: 252.0" in out and "mu_beta[x1]" in out
    rows = list(csv.reader((tmp_path / "r1.draws.csv").open()))
    assert rows[0] == ["sigma2", "beta[(intercept)]", "beta[x1]"]
    assert len(rows) == 21
    assert all(float(r[0]) > 0 for r in rows[1:])
    assert main(fit_args(data, tmp_path / "r2", "--draws", "20")) == EXIT_OK
    assert (tmp_path / "r1.draws.csv").read_bytes() == (tmp_path / "r2.draws.csv").read_bytes()
    assert (tmp_path / "r1.summary.txt").read_text() == (tmp_path / "r2.summary.txt").read_text()


def test_fit_include_w_and_method(tmp_path):
    data = simulate(tmp_path, n=60)
    assert main(fit_args(data, tmp_path / "w", "--draws", "2", "--include-w", "--method", "pcg-ic0")) == EXIT_OK
    head = (tmp_path / "w.draws.csv").read_text().splitlines()[0].split(",")
    assert len(head) == 3 + 60 and head[3] == "w0"


def test_fit_bad_method_lists_names(tmp_path, capsys):
    data = simulate(tmp_path, n=20)
    capsys.readouterr()
    assert main(fit_args(data, tmp_path / "r", "--method", "bogus")) == EXIT_USAGE
    err = capsys.readouterr().err
    assert "cgsparse" in err and "symbolic-cholesky" in err


def test_fit_data_errors(tmp_path):
    assert main(fit_args(tmp_path / "missing.csv", tmp_path / "r")) == EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("coord_x,coord_y,y,x1\n0.1,0.2,NA,1\n")
    assert main(fit_args(bad, tmp_path / "r")) == EXIT_DATA
    data = simulate(tmp_path, n=20)
    assert main(fit_args(data, tmp_path / "r", "--lon-col", "coord_x")) == EXIT_USAGE


def test_solve_identity_echoes_rhs(tmp_path, capsys):
    m, b = write_system(tmp_path, np.eye(4), [1.0, -2.0, 3.5, 0.0])
    assert main(["solve", "--matrix", m, "--rhs", b]) == EXIT_OK
    assert np.array_equal(solution(capsys.readouterr().out), [1.0, -2.0, 3.5, 0.0])


@pytest.mark.parametrize("method", ["cg", "pcg-identity", "pcg-jacobi", "pcg-ic0", "cgls", "cholesky", "dense"])
def test_solve_two_by_two(tmp_path, capsys, method):
    m, b = write_system(tmp_path, [[4.0, 1.0], [1.0, 3.0]], [1.0, 2.0])
    assert main(["solve", "--matrix", m, "--rhs", b, "--method", method]) == EXIT_OK
    assert np.allclose(solution(capsys.readouterr().out), [1 / 11, 7 / 11], atol=1e-7)


def test_solve_cholesky_matches_cg_on_tridiagonal(tmp_path, capsys):
    n = 40
    a = np.diag(np.full(n, 4.0)) + np.diag(np.full(n - 1, -1.0), 1) + np.diag(np.full(n - 1, -1.0), -1)
    m, b = write_system(tmp_path, a, np.arange(n, dtype=float))
    assert main(["solve", "--matrix", m, "--rhs", b, "--method", "cholesky"]) == EXIT_OK
    x1 = solution(capsys.readouterr().out)
    assert main(["solve", "--matrix", m, "--rhs", b, "--method", "cgsparse", "--tol", "1e-12"]) == EXIT_OK
    x2 = solution(capsys.readouterr().out)
    assert np.max(np.abs(x1 - x2)) <= 1e-8


def test_solve_numerical_failures(tmp_path, capsys):
    m, b = write_system(tmp_path, [[1.0, 2.0], [2.0, 1.0]], [1.0, 0.0])
    assert main(["solve", "--matrix", m, "--rhs", b, "--method", "cholesky"]) == EXIT_NUMERIC
    m2, b2 = write_system(tmp_path, [[1.0, 2.0], [0.0, 1.0]], [1.0, 0.0], name="ns")
    assert main(["solve", "--matrix", m2, "--rhs", b2]) == EXIT_NUMERIC
    rng = np.random.default_rng(0)
    q = rng.standard_normal((30, 30))
    m3, b3 = write_system(tmp_path, q @ q.T + 1e-3 * np.eye(30), np.ones(30), name="slow")
    assert main(["solve", "--matrix", m3, "--rhs", b3, "--max-iter", "2"]) == EXIT_NUMERIC
    assert "did not converge" in capsys.readouterr().err


def test_solve_data_errors(tmp_path):
    m, b = write_system(tmp_path, np.eye(3), [1.0, 2.0])
    assert main(["solve", "--matrix", m, "--rhs", b]) == EXIT_DATA
    bad = tmp_path / "bad.csv"
    bad.write_text("i,j,v\n0,0,1\n")
    assert main(["solve", "--matrix", str(bad), "--rhs", b]) == EXIT_DATA


def test_bench_single_method(tmp_path, capsys):
    out = tmp_path / "bo"
    code = main(["bench", "--sizes", "60", "--delta2", "0.1", "--methods", "jacobi", "--reps", "2",
                 "--seed", "1", "--out-dir", str(out), "--view", "per-delta2"])
    assert code == EXIT_OK
    text = capsys.readouterr().out
    assert "| jacobi-pcg | 1.000 |" in text
    csvs = sorted(out.glob("bench_*.csv"))
    assert len(csvs) == 1
    recs = parse_table_csv(csvs[0].read_text())
    assert [r["relative"] for r in recs if r["view"] == "per-delta2"] == ["1.000"]
    assert (out / "plot_delta0.1.csv").exists() and list(out.glob("bench_*.md"))


def test_bench_usage_errors(tmp_path):
    assert main(["bench", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert main(["bench", "--sizes", "60", "--methods", "nope", "--out-dir", str(tmp_path)]) == EXIT_USAGE
    assert main(["bench", "--sizes", "60,70", "--reps", "1,2,3", "--out-dir", str(tmp_path)]) == EXIT_USAGE
