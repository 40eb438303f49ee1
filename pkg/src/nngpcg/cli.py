"""``nngpcg`` command line: simulate, fit, solve, bench.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .bench import BenchConfig, desk_grid, emit_table, run_benchmark, write_outputs
from .data_io import DataError, read_csv, simulate_dataset, write_csv
from .kernels import CovarianceKernel
from .posterior import METHODS, NigPrior, canonical_method, fit
from .preconditioners import ic0_build, identity_build, jacobi_build
from .rng import RngState, fresh_seed
from .solvers import (
    DenseSizeError,
    SolverConfig,
    cg_solve,
    cgls_solve,
    dense_solve,
    pcg_solve,
    symbolic_cholesky_solve,
)
from .sparse_core import SparseError, from_triplets, spmv, transpose

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _method(text: str) -> str:
    try:
        return canonical_method(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _methods(text: str) -> list[str]:
    return [_method(v) for v in _names(text)]


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nngpcg", description="Exact conjugate NNGP regression with sparse solvers.")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="simulate a spatial dataset on the unit square")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--p", type=int, default=2, help="columns of X including the intercept")
    s.add_argument("--beta", type=_floats, default=None, help="true coefficients (default all ones)")
    s.add_argument("--phi", type=float, default=7.0)
    s.add_argument("--sigma2", type=float, default=1.0)
    s.add_argument("--delta2", type=float, default=0.01)
    s.add_argument("--m", type=int, default=10)
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("--out", required=True, help="dataset CSV; the truth sidecar goes next to it")

    f = sub.add_parser("fit", help="posterior mean, (a*, b*) and exact joint draws")
    f.add_argument("--data", required=True)
    f.add_argument("--lon-col")
    f.add_argument("--lat-col")
    f.add_argument("--coord-x-col", help="planar first coordinate (instead of --lon-col/--lat-col)")
    f.add_argument("--coord-y-col", help="planar second coordinate")
    f.add_argument("--y-col", required=True, help="response column")
    f.add_argument("--x-cols", type=_names, default=[], help="covariate columns, comma-separated")
    f.add_argument("--no-intercept", action="store_true")
    f.add_argument("--m", type=int, default=10)
    f.add_argument("--phi", type=float, default=7.0)
    f.add_argument("--sigma2", type=float, default=1.0, help="kernel scale used to build the NNGP factors")
    f.add_argument("--delta2", type=float, required=True)
    f.add_argument("--prior-a", type=float, default=2.0)
    f.add_argument("--prior-b", type=float, default=1.0)
    f.add_argument("--method", type=_method, default="cgsparse")
    f.add_argument("--draws", type=int, default=100)
    f.add_argument("--include-w", action="store_true", help="write latent draws to the draws file")
    f.add_argument("--tol", type=float, default=None)
    f.add_argument("--seed", type=int, default=None)
    f.add_argument("--out", required=True, help="output prefix: <out>.summary.txt and <out>.draws.csv")

    v = sub.add_parser("solve", help="solve A x = b from triplet CSV")
    v.add_argument("--matrix", required=True, help="CSV with header row,col,value (0-based)")
    v.add_argument("--rhs", required=True, help="CSV with header value")
    v.add_argument("--method", type=_method, default="cgsparse")
    v.add_argument("--tol", type=float, default=1e-8)
    v.add_argument("--max-iter", type=int, default=None)

    b = sub.add_parser("bench", help="time the solve strategies on simulated posterior systems")
    b.add_argument("--sizes", type=_ints, default=None)
    b.add_argument("--delta2", type=_floats, default=None)
    b.add_argument("--methods", type=_methods, default=None)
    b.add_argument("--reps", type=_ints, default=None, help="one count, or one per size")
    b.add_argument("--timeout", type=float, default=None, help="seconds per method per setting")
    b.add_argument("--m", type=int, default=None)
    b.add_argument("--phi", type=float, default=None)
    b.add_argument("--desk", action="store_true", help="start from the desk-scale grid")
    b.add_argument("--view", choices=["per-delta2", "summed", "both"], default="both")
    b.add_argument("--seed", type=int, default=None)
    b.add_argument("--out-dir", default="bench_out")
    return ap


def _seed(args) -> int:
    if args.seed is None:
        args.seed = fresh_seed()
    return args.seed


def _print_config(args, **extra):
    cfg = {k: v for k, v in vars(args).items() if k != "command"}
    cfg.update(extra)
    print(f"[nngpcg {args.command}] config: {json.dumps(cfg, default=str, sort_keys=True)}", file=sys.stderr)
    if "seed" in cfg:
        print(f"[nngpcg {args.command}] seed: {cfg['seed']}", file=sys.stderr)


def _cmd_simulate(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if args.p < 1:
        raise UsageError("--p must be at least 1")
    if args.m < 1:
        raise UsageError("--m must be at least 1")
    if not (args.delta2 > 0 and args.sigma2 > 0 and args.phi > 0):
        raise UsageError("--delta2, --sigma2 and --phi must be positive")
    beta = args.beta if args.beta is not None else [1.0] * args.p
    if len(beta) != args.p:
        raise UsageError(f"--beta needs {args.p} values")
    seed = _seed(args)
    _print_config(args, beta=beta)
    kernel = CovarianceKernel(sigma2=args.sigma2, phi=args.phi)
    ds, truth = simulate_dataset(args.n, args.p, kernel, beta, args.delta2, args.m, RngState(seed))
    out = Path(args.out)
    write_csv(ds, out)
    side = truth_path(out)
    with side.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["key", "value"])
        for j, bj in enumerate(truth["beta"]):
            w.writerow([f"beta{j}", repr(float(bj))])
        for key in ("seed", "n", "p", "sigma2", "phi", "delta2", "m"):
            w.writerow([key, truth[key]])
    print(f"wrote {out} ({args.n} rows) and {side}")
    return EXIT_OK


def truth_path(out: Path) -> Path:
    return out.with_name(out.stem + ".truth.csv")


def _cmd_fit(args) -> int:
    geo = args.lon_col is not None or args.lat_col is not None
    planar = args.coord_x_col is not None or args.coord_y_col is not None
    if geo == planar:
        raise UsageError("give either --lon-col/--lat-col or --coord-x-col/--coord-y-col")
    if geo and (args.lon_col is None or args.lat_col is None):
        raise UsageError("--lon-col and --lat-col go together")
    if planar and (args.coord_x_col is None or args.coord_y_col is None):
        raise UsageError("--coord-x-col and --coord-y-col go together")
    if args.draws < 0 or args.m < 1:
        raise UsageError("--draws must be >= 0 and --m >= 1")
    if not (args.delta2 > 0 and args.phi > 0 and args.sigma2 > 0):
        raise UsageError("--delta2, --phi and --sigma2 must be positive")
    seed = _seed(args)
    _print_config(args)
    ds = read_csv(args.data, args.y_col, args.x_cols, lon_col=args.lon_col, lat_col=args.lat_col,
                  coord_cols=[args.coord_x_col, args.coord_y_col] if planar else None,
                  intercept=not args.no_intercept)
    kernel = CovarianceKernel(sigma2=args.sigma2, phi=args.phi)
    cfg = SolverConfig(tol=args.tol) if args.tol is not None else None
    summary, draws = fit(ds.x, ds.y, ds.locations, args.m, kernel, args.delta2, NigPrior(args.prior_a, args.prior_b),
                         args.method, args.draws, RngState(seed), cfg)
    bad = [r for r in summary.solve_reports if not r.converged]
    names = ds.names["x"]
    lines = [f"method: {args.method}", f"n: {ds.n}", f"p: {ds.p}", f"seed: {seed}",
             f"a_star: {summary.a_star!r}", f"b_star: {summary.b_star!r}"]
    lines += [f"mu_beta[{nm}]: {float(v)!r}" for nm, v in zip(names, summary.beta)]
    lines += [f"mu_w head: {', '.join(repr(float(v)) for v in summary.w[:5])}"]
    rep = summary.solve_reports[0]
    lines += [f"mean solve: iterations={rep.iterations} residual={rep.residual_norm:.3e} converged={rep.converged}",
              f"draw solves: {len(summary.solve_reports) - 1} (unconverged: {len(bad)})"]
    # wall time stays out of the summary file so equal seeds give identical files
    wall = sum(r.wall_time for r in summary.solve_reports)
    print(f"[nngpcg fit] solve wall time: {wall:.4f} s", file=sys.stderr)
    text = "\n".join(lines) + "\n"
    prefix = Path(args.out)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(str(prefix) + ".summary.txt").write_text(text, encoding="utf-8")
    with open(str(prefix) + ".draws.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        head = ["sigma2"] + [f"beta[{nm}]" for nm in names]
        if args.include_w:
            head += [f"w{i}" for i in range(ds.n)]
        w.writerow(head)
        for d in draws:
            row = [d.sigma2, *d.beta] + (list(d.w) if args.include_w else [])
            w.writerow([repr(float(v)) for v in row])
    sys.stdout.write(text)
    if bad:
        raise NumericalFailure(f"{len(bad)} solve(s) did not converge")
    return EXIT_OK


def _read_triplets(path):
    rows, cols, vals = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames] != ["row", "col", "value"]:
            raise DataError(f"{path}: header must be row,col,value")
        for line, rec in enumerate(reader, start=2):
            try:
                r, c, v = int(rec["row"]), int(rec["col"]), float(rec["value"])
            except (TypeError, ValueError):
                raise DataError(f"{path} line {line}: malformed triplet") from None
            if r < 0 or c < 0 or not np.isfinite(v):
                raise DataError(f"{path} line {line}: negative index or non-finite value")
            rows.append(r)
            cols.append(c)
            vals.append(v)
    return rows, cols, vals


def _read_vector(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or [h.strip() for h in head] != ["value"]:
            raise DataError(f"{path}: header must be value")
        out = []
        for line, rec in enumerate(reader, start=2):
            if not rec:
                continue
            try:
                out.append(float(rec[0]))
            except ValueError:
                raise DataError(f"{path} line {line}: cannot parse {rec[0]!r}") from None
    return np.array(out)


def _cmd_solve(args) -> int:
    if not args.tol > 0 or (args.max_iter is not None and args.max_iter < 1):
        raise UsageError("--tol must be positive and --max-iter at least 1")
    _print_config(args, seed="not used")
    b = _read_vector(args.rhs)
    rows, cols, vals = _read_triplets(args.matrix)
    n = b.shape[0]
    if rows and max(max(rows), max(cols)) >= n:
        raise DataError(f"matrix indices exceed the rhs length {n}")
    a = from_triplets(None, n, n, rows, cols, vals)
    cfg = SolverConfig(tol=args.tol, max_iter=args.max_iter)
    m = args.method
    t = a.values - _transpose_values(a)
    if t.size and np.max(np.abs(t)) > 1e-12 * max(1.0, float(np.max(np.abs(a.values)))):
        raise NumericalFailure("matrix is not symmetric; all methods here need an SPD matrix")
    if m == "cgsparse":
        x, rep = cg_solve(a, b, cfg=cfg)
    elif m == "identity-pcg":
        x, rep = pcg_solve(a, identity_build(n), b, cfg, method=m)
    elif m == "jacobi-pcg":
        x, rep = pcg_solve(a, jacobi_build(a), b, cfg, method=m)
    elif m == "ic0-pcg":
        x, rep = pcg_solve(a, ic0_build(a, shift_on_breakdown=True), b, cfg, method=m)
    elif m == "cgls":
        x, rep = cgls_solve(a, b, cfg)
    elif m == "symbolic-cholesky":
        x, rep = symbolic_cholesky_solve(a, b)
    else:
        x = dense_solve(a, b)
        rep = None
    out = csv.writer(sys.stdout, lineterminator="\n")
    out.writerow(["value"])
    for v in x:
        out.writerow([repr(float(v))])
    res = float(np.linalg.norm(spmv(a, x) - b))
    if rep is None:
        print(f"method=dense residual={res:.3e}", file=sys.stderr)
        return EXIT_OK
    print(f"method={m} iterations={rep.iterations} residual={res:.3e} converged={rep.converged} "
          f"time={rep.wall_time:.6f}s", file=sys.stderr)
    if not rep.converged:
        raise NumericalFailure(f"{m} did not converge in {rep.iterations} iterations")
    return EXIT_OK


def _transpose_values(a) -> np.ndarray:
    """Values of A^T on A's pattern; inf everywhere if the patterns differ."""
    at = transpose(a)
    if not (np.array_equal(at.row_ptr, a.row_ptr) and np.array_equal(at.col_idx, a.col_idx)):
        return np.full(a.nnz, np.inf)
    return at.values


def _cmd_bench(args) -> int:
    seed = _seed(args)
    base = desk_grid() if args.desk else None
    if base is None and args.sizes is None:
        raise UsageError("bench needs --sizes or --desk")
    sizes = args.sizes or base.sizes
    reps = args.reps or (base.replications if base and args.sizes is None else [1])
    if len(reps) == 1:
        reps = reps * len(sizes)
    try:
        cfg = BenchConfig(
            sizes=sizes,
            delta2_grid=args.delta2 or (base.delta2_grid if base else [0.001, 0.01, 0.1, 1.0]),
            methods=args.methods or list(METHODS),
            replications=reps,
            m=args.m or 10,
            phi=args.phi or 7.0,
            timeout=args.timeout or (base.timeout if base else 600.0),
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _print_config(args, resolved={k: getattr(cfg, k) for k in
                                  ("sizes", "delta2_grid", "methods", "replications", "m", "phi", "timeout", "seed")})

    def progress(row):
        print(f"  n={row.n} delta2={row.delta2:g} {row.method}: {row.status}", file=sys.stderr)

    rows = run_benchmark(cfg, progress=progress)
    files = write_outputs(rows, args.out_dir, timeout=cfg.timeout)
    sys.stdout.write(emit_table(rows, "markdown", view=args.view, timeout=cfg.timeout))
    for p in files:
        print(f"wrote {p}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"simulate": _cmd_simulate, "fit": _cmd_fit, "solve": _cmd_solve, "bench": _cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"nngpcg {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalFailure, ArithmeticError, DenseSizeError, np.linalg.LinAlgError) as exc:
        print(f"nngpcg {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, SparseError, ValueError, OSError) as exc:
        print(f"nngpcg {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
