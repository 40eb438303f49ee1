"""Compare the compiled and pure-Python kernel backends.

    python benchmarks/bench_backends.py [--n 2000] [--repeat 3]

Both backends run the same inputs; outputs are checked for equality before
timings are reported.
"""

import argparse
import time

import numpy as np

from nngpcg import _backend
from nngpcg.kernels import CovarianceKernel
from nngpcg.nngp import assemble_precision, build_order, nngp
from nngpcg.rng import RngState
from nngpcg.solvers import symbolic_cholesky


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n, m):
    rng = RngState(11)
    locs = rng.uniform(2 * n).reshape(n, 2)
    order = build_order(locs)
    coords = np.ascontiguousarray(locs[order])
    q = assemble_precision(nngp(CovarianceKernel(), locs, m))
    low = q.lower()
    sym = symbolic_cholesky(q)
    x = rng.normals(n)
    return {
        "csr_matvec": lambda k: k.csr_matvec(q.row_ptr, q.col_idx, q.values, x),
        "csr_lower_solve": lambda k: k.csr_lower_solve(low.row_ptr, low.col_idx, low.values, x)[0],
        "etree": lambda k: k.etree(q.row_ptr, q.col_idx),
        "symbolic_pattern": lambda k: k.symbolic_pattern(q.row_ptr, q.col_idx, sym.elimination_tree)[1],
        "ic0 (chol_on_pattern)": lambda k: k.chol_on_pattern(q.row_ptr, q.col_idx, q.values,
                                                             low.row_ptr, low.col_idx)[0],
        "knn_earlier": lambda k: k.knn_earlier(coords, m),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--m", type=int, default=10)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if "cython" not in _backend.AVAILABLE:
        raise SystemExit("compiled backend not built; run pip install -e . --no-build-isolation")
    py, cy = _backend.AVAILABLE["python"], _backend.AVAILABLE["cython"]
    print(f"n = {args.n}, m = {args.m}, best of {args.repeat}")
    print(f"{'kernel':<24}{'python (s)':>12}{'cython (s)':>12}{'speedup':>10}")
    for name, fn in cases(args.n, args.m).items():
        tp, op = _best(lambda: fn(py), args.repeat)
        tc, oc = _best(lambda: fn(cy), args.repeat)
        if not np.allclose(op, oc, rtol=1e-12, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        print(f"{name:<24}{tp:>12.4f}{tc:>12.4f}{tp / max(tc, 1e-12):>10.1f}")


if __name__ == "__main__":
    main()
