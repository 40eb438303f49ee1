"""Krylov, sparse direct and dense solvers for SPD systems.

``cg_solve`` follows the textbook recurrences literally: step
``alpha = p^T r / p^T A p`` and direction update
``tau = -r_k^T A p / p^T A p``. ``pcg_solve`` is Hestenes-Stiefel PCG with
the ``z^T r`` ratio. Both stop on the true residual ``|b - Ax| <= tol |b|``:
when the recursive residual first passes the test, the true residual is
computed and, if it fails, substituted for the recursive one (the only extra
matvec either solver ever makes).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from . import _backend
from .preconditioners import Preconditioner, identity_build
from .sparse_core import (
    SingularFactorError,
    SparseError,
    SparseMatrix,
    lower_t_solve,
    lower_tri_solve,
    to_dense,
)

DENSE_MAX_N = 20_000


class NotSPDError(ArithmeticError):
    """Operator found not to be symmetric positive definite."""

    def __init__(self, msg: str, index: int | None = None):
        super().__init__(msg)
        self.index = index


class DenseSizeError(MemoryError):
    pass


class LinearOperator:
    """Square operator given by a matvec, optionally backed by an explicit matrix."""

    def __init__(self, n: int, matvec: Callable[[np.ndarray], np.ndarray], matrix: SparseMatrix | None = None):
        self.n = int(n)
        self.matvec = matvec
        self.matrix = matrix

    def __repr__(self) -> str:
        return f"LinearOperator(n={self.n}, explicit={self.matrix is not None})"


def aslinearoperator(a) -> LinearOperator:
    if isinstance(a, LinearOperator):
        return a
    if isinstance(a, SparseMatrix):
        if a.n_rows != a.n_cols:
            raise SparseError(f"operator must be square, got {a.shape}")
        k = _backend.kernels
        return LinearOperator(a.n_rows, lambda v: k.csr_matvec(a.row_ptr, a.col_idx, a.values, v), a)
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise SparseError(f"operator must be square, got shape {arr.shape}")
    return LinearOperator(arr.shape[0], lambda v: arr @ v)


@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_iter: int | None = None  # None means 10 * n
    record_history: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")

    def cap(self, n: int) -> int:
        return self.max_iter if self.max_iter is not None else max(10 * n, 1)


@dataclass
class SolveReport:
    method: str
    iterations: int
    residual_norm: float
    converged: bool
    wall_time: float
    residual_history: list[float] | None = None
    history: dict[str, list[np.ndarray]] | None = field(default=None, repr=False)
    notes: dict = field(default_factory=dict)


def _rhs(b, n: int) -> np.ndarray:
    b = np.ascontiguousarray(b, dtype=np.float64)
    if b.shape != (n,):
        raise SparseError(f"right-hand side must have length {n}, got shape {b.shape}")
    return b


def cg_solve(a, b, x0=None, cfg: SolverConfig | None = None) -> tuple[np.ndarray, SolveReport]:
    """Conjugate gradient with the recurrences written out verbatim."""
    cfg = cfg or SolverConfig()
    op = aslinearoperator(a)
    n = op.n
    b = _rhs(b, n)
    t0 = time.perf_counter()
    x = np.zeros(n) if x0 is None else _rhs(x0, n).copy()
    r = b - op.matvec(x) if x0 is not None else b.copy()
    p = r.copy()
    bnorm = float(np.linalg.norm(b))
    target = cfg.tol * bnorm
    hist = {"x": [x.copy()], "r": [r.copy()], "p": [p.copy()]} if cfg.record_history else None
    res_hist = [float(np.linalg.norm(r))] if cfg.record_history else None
    rnorm = float(np.linalg.norm(r))
    converged = rnorm <= target
    k = 0
    cap = cfg.cap(n)
    while not converged and k < cap:
        ap = op.matvec(p)
        pap = float(p @ ap)
        if not pap > 0:
            raise NotSPDError(f"p^T A p = {pap:.3g} <= 0 at iteration {k + 1}", k + 1)
        alpha = float(p @ r) / pap
        x += alpha * p
        r -= alpha * ap
        k += 1
        rnorm = float(np.linalg.norm(r))
        if rnorm <= target:
            r_true = b - op.matvec(x)
            rnorm = float(np.linalg.norm(r_true))
            if rnorm <= target:
                converged = True
            else:
                r = r_true
        tau = -float(r @ ap) / pap
        p = r + tau * p
        if hist is not None:
            hist["x"].append(x.copy())
            hist["r"].append(r.copy())
            hist["p"].append(p.copy())
            res_hist.append(rnorm)
    if not converged:
        rnorm = float(np.linalg.norm(b - op.matvec(x)))
    wall = time.perf_counter() - t0
    rep = SolveReport("cgsparse", k, rnorm, converged, wall, res_hist, hist)
    return x, rep


def pcg_solve(a, m: Preconditioner | None, b, cfg: SolverConfig | None = None, x0=None,
              method: str = "pcg") -> tuple[np.ndarray, SolveReport]:
    """Preconditioned CG with z = M^{-1} r."""
    cfg = cfg or SolverConfig()
    op = aslinearoperator(a)
    n = op.n
    b = _rhs(b, n)
    m = m or identity_build(n)
    t0 = time.perf_counter()
    x = np.zeros(n) if x0 is None else _rhs(x0, n).copy()
    r = b - op.matvec(x) if x0 is not None else b.copy()
    z = m.apply(r)
    p = z.copy()
    rz = float(r @ z)
    bnorm = float(np.linalg.norm(b))
    target = cfg.tol * bnorm
    hist = {"x": [x.copy()], "r": [r.copy()], "p": [p.copy()]} if cfg.record_history else None
    res_hist = [float(np.linalg.norm(r))] if cfg.record_history else None
    rnorm = float(np.linalg.norm(r))
    converged = rnorm <= target
    k = 0
    cap = cfg.cap(n)
    while not converged and k < cap:
        ap = op.matvec(p)
        pap = float(p @ ap)
        if not pap > 0:
            raise NotSPDError(f"p^T A p = {pap:.3g} <= 0 at iteration {k + 1}", k + 1)
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        k += 1
        rnorm = float(np.linalg.norm(r))
        if rnorm <= target:
            r_true = b - op.matvec(x)
            rnorm = float(np.linalg.norm(r_true))
            if rnorm <= target:
                converged = True
            else:
                r = r_true
        z = m.apply(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        if hist is not None:
            hist["x"].append(x.copy())
            hist["r"].append(r.copy())
            hist["p"].append(p.copy())
            res_hist.append(rnorm)
    if not converged:
        rnorm = float(np.linalg.norm(b - op.matvec(x)))
    wall = time.perf_counter() - t0
    rep = SolveReport(method, k, rnorm, converged, wall, res_hist, hist, {"shift": m.shift})
    return x, rep


def cgls_solve(x_mat, y, cfg: SolverConfig | None = None) -> tuple[np.ndarray, SolveReport]:
    """Least squares min |X v - y| by CG on the normal equations, never forming X^T X.

    Converged means ``|X^T (y - X v)| <= tol |X^T y|``.
    """
    cfg = cfg or SolverConfig()
    if isinstance(x_mat, SparseMatrix):
        nr, nc = x_mat.shape
        k = _backend.kernels
        mv = lambda v: k.csr_matvec(x_mat.row_ptr, x_mat.col_idx, x_mat.values, v)  # noqa: E731
        rmv = lambda u: k.csr_rmatvec(x_mat.row_ptr, x_mat.col_idx, x_mat.values, u, nc)  # noqa: E731
    else:
        dense = np.asarray(x_mat, dtype=np.float64)
        nr, nc = dense.shape
        mv = lambda v: dense @ v  # noqa: E731
        rmv = lambda u: dense.T @ u  # noqa: E731
    y = _rhs(y, nr)
    t0 = time.perf_counter()
    v = np.zeros(nc)
    r = y.copy()
    s = rmv(r)
    p = s.copy()
    gamma = float(s @ s)
    target = cfg.tol * np.sqrt(gamma)
    snorm = np.sqrt(gamma)
    res_hist = [snorm] if cfg.record_history else None
    converged = snorm <= target
    it = 0
    cap = cfg.cap(nc)
    while not converged and it < cap:
        q = mv(p)
        qq = float(q @ q)
        if not qq > 0:
            break
        alpha = gamma / qq
        v += alpha * p
        r -= alpha * q
        s = rmv(r)
        it += 1
        gamma_new = float(s @ s)
        snorm = np.sqrt(gamma_new)
        if snorm <= target:
            s_true = rmv(y - mv(v))
            snorm = float(np.linalg.norm(s_true))
            if snorm <= target:
                converged = True
            else:
                r = y - mv(v)
                s = s_true
                gamma_new = float(s @ s)
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
        if res_hist is not None:
            res_hist.append(snorm)
    wall = time.perf_counter() - t0
    return v, SolveReport("cgls", it, float(snorm), bool(converged), wall, res_hist)


# --- sparse direct -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymbolicFactor:
    """Elimination tree and exact nonzero pattern of the Cholesky factor."""

    elimination_tree: np.ndarray
    column_counts: np.ndarray
    l_row_ptr: np.ndarray
    l_col_idx: np.ndarray

    @property
    def n(self) -> int:
        return self.elimination_tree.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.l_row_ptr[-1])

    @property
    def l_pattern(self) -> SparseMatrix:
        return SparseMatrix(self.n, self.n, self.l_row_ptr.copy(), self.l_col_idx.copy(), np.ones(self.nnz))


def symbolic_cholesky(pattern: SparseMatrix) -> SymbolicFactor:
    """Elimination tree and row-wise pattern of L under the natural ordering.

    Only the lower triangle of ``pattern`` is read; it is assumed to be
    structurally symmetric.
    """
    if pattern.n_rows != pattern.n_cols:
        raise SparseError(f"symbolic_cholesky needs a square pattern, got {pattern.shape}")
    k = _backend.kernels
    low = pattern.lower()
    parent = k.etree(low.row_ptr, low.col_idx)
    lp, li = k.symbolic_pattern(low.row_ptr, low.col_idx, parent)
    counts = np.bincount(li, minlength=pattern.n_rows).astype(np.int64)
    return SymbolicFactor(parent, counts, lp, li)


def numeric_cholesky(a: SparseMatrix, sym: SymbolicFactor) -> SparseMatrix:
    """Lower factor L with L L^T = A, values filled inside the symbolic pattern only."""
    if a.shape != (sym.n, sym.n):
        raise SparseError("matrix and symbolic factor sizes differ")
    vals, bad = _backend.kernels.chol_on_pattern(a.row_ptr, a.col_idx, a.values, sym.l_row_ptr, sym.l_col_idx)
    if bad >= 0:
        raise NotSPDError(f"non-positive pivot at index {bad}: matrix is not SPD", bad)
    return SparseMatrix(sym.n, sym.n, sym.l_row_ptr.copy(), sym.l_col_idx.copy(), vals)


def cholesky_solve(l: SparseMatrix, b) -> np.ndarray:
    return lower_t_solve(l, lower_tri_solve(l, b))


def symbolic_cholesky_solve(a: SparseMatrix, b, perm=None) -> tuple[np.ndarray, SolveReport]:
    """Symbolic analysis, numeric factorization and two triangular solves, timed together.

    ``perm`` optionally relabels unknowns before factorization (``a[perm][:, perm]``).
    """
    b = _rhs(b, a.n_rows)
    t0 = time.perf_counter()
    if perm is not None:
        perm = np.asarray(perm, dtype=np.int64)
        a = permute_symmetric(a, perm)
        b = b[perm]
    sym = symbolic_cholesky(a)
    l = numeric_cholesky(a, sym)
    x = cholesky_solve(l, b)
    if perm is not None:
        out = np.empty_like(x)
        out[perm] = x
        x = out
    wall = time.perf_counter() - t0
    return x, SolveReport("symbolic-cholesky", 0, float("nan"), True, wall, notes={"nnz_l": sym.nnz})


def permute_symmetric(a: SparseMatrix, perm: np.ndarray) -> SparseMatrix:
    """P A P^T with ``new index i`` = old index ``perm[i]``."""
    from .sparse_core import from_triplets

    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.shape[0])
    return from_triplets(None, a.n_rows, a.n_cols, inv[a.row_indices()], inv[a.col_idx], a.values)


# --- dense -----------------------------------------------------------------


def densify(a, max_n: int | None = None) -> np.ndarray:
    max_n = DENSE_MAX_N if max_n is None else max_n
    if isinstance(a, SparseMatrix):
        if a.n_rows > max_n:
            raise DenseSizeError(f"dense solve limited to n <= {max_n}, got {a.n_rows}")
        return to_dense(a, max_entries=max_n * max_n)
    return np.asarray(a, dtype=np.float64)


def dense_solve(a, b, max_n: int | None = None) -> np.ndarray:
    """Reference dense solve: Cholesky when SPD, partial-pivot LU otherwise."""
    arr = densify(a, max_n)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise SparseError(f"dense_solve needs a square matrix, got {arr.shape}")
    n = arr.shape[0]
    max_n = DENSE_MAX_N if max_n is None else max_n
    if n > max_n:
        raise DenseSizeError(f"dense solve limited to n <= {max_n}, got {n}")
    b = _rhs(b, n)
    if np.array_equal(arr, arr.T):
        try:
            c = scipy.linalg.cho_factor(arr, lower=True, check_finite=False)
            return scipy.linalg.cho_solve(c, b, check_finite=False)
        except np.linalg.LinAlgError:
            pass
    try:
        lu = scipy.linalg.lu_factor(arr, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SingularFactorError(-1) from exc
    if np.any(np.diag(lu[0]) == 0):
        raise SingularFactorError(int(np.flatnonzero(np.diag(lu[0]) == 0)[0]))
    return scipy.linalg.lu_solve(lu, b, check_finite=False)


def dense_solve_report(a, b, max_n: int | None = None) -> tuple[np.ndarray, SolveReport]:
    t0 = time.perf_counter()
    x = dense_solve(a, b, max_n)
    wall = time.perf_counter() - t0
    return x, SolveReport("dense", 0, float("nan"), True, wall)


def residual_norm(a, x, b) -> float:
    op = aslinearoperator(a)
    return float(np.linalg.norm(np.asarray(b) - op.matvec(np.asarray(x, dtype=np.float64))))


__all__ = [
    "DENSE_MAX_N",
    "DenseSizeError",
    "LinearOperator",
    "NotSPDError",
    "SolveReport",
    "SolverConfig",
    "SymbolicFactor",
    "aslinearoperator",
    "cg_solve",
    "cgls_solve",
    "cholesky_solve",
    "dense_solve",
    "dense_solve_report",
    "numeric_cholesky",
    "pcg_solve",
    "permute_symmetric",
    "residual_norm",
    "symbolic_cholesky",
    "symbolic_cholesky_solve",
]
