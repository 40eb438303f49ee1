"""Identity, Jacobi and zero-fill incomplete Cholesky preconditioners."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _backend
from .sparse_core import SingularFactorError, SparseError, SparseMatrix


class PreconditionerKind(enum.Enum):
    IDENTITY = "identity"
    JACOBI = "jacobi"
    INCOMPLETE_CHOLESKY = "ic0"


class PreconditionerError(ValueError):
    pass


class ICBreakdown(ArithmeticError):
    """Non-positive pivot during incomplete factorization."""

    def __init__(self, pivot: int):
        super().__init__(f"incomplete Cholesky breakdown: non-positive pivot at index {pivot}")
        self.pivot = pivot


@dataclass(frozen=True, eq=False)
class Preconditioner:
    """``apply`` returns M^{-1} r. ``shift`` is the diagonal shift IC(0) needed (0 if none)."""

    kind: PreconditionerKind
    n: int | None = None
    diagonal: np.ndarray | None = None
    factor: SparseMatrix | None = None
    shift: float = 0.0

    def apply(self, r) -> np.ndarray:
        return apply(self, r)


def identity_build(n: int | None = None) -> Preconditioner:
    return Preconditioner(PreconditionerKind.IDENTITY, n=n)


def jacobi_build(a: SparseMatrix) -> Preconditioner:
    if a.n_rows != a.n_cols:
        raise PreconditionerError("Jacobi preconditioner needs a square matrix")
    if not a.has_full_diagonal():
        raise PreconditionerError("Jacobi preconditioner: matrix has a missing diagonal entry")
    d = a.diagonal()
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise PreconditionerError(f"Jacobi preconditioner: non-positive diagonal at index {bad[0]} ({d[bad[0]]:.3g})")
    return Preconditioner(PreconditionerKind.JACOBI, n=a.n_rows, diagonal=d)


def _ic0_factor(a: SparseMatrix, low: SparseMatrix) -> tuple[np.ndarray, int]:
    return _backend.kernels.chol_on_pattern(a.row_ptr, a.col_idx, a.values, low.row_ptr, low.col_idx)


def ic0_build(a: SparseMatrix, shift_on_breakdown: bool = False, max_shift: float = 1e3) -> Preconditioner:
    """IC(0): Cholesky values computed only on the lower pattern of ``a``.

    On breakdown either raise :class:`ICBreakdown` or, with
    ``shift_on_breakdown``, retry on ``a + alpha * diag(a)`` for
    ``alpha = 1e-3, 2e-3, 4e-3, ...`` and record the final ``alpha``.
    """
    if a.n_rows != a.n_cols:
        raise PreconditionerError("IC(0) needs a square matrix")
    low = a.lower()
    if not low.has_full_diagonal():
        raise PreconditionerError("IC(0): matrix has a missing diagonal entry")
    vals, bad = _ic0_factor(a, low)
    alpha = 0.0
    if bad >= 0:
        if not shift_on_breakdown:
            raise ICBreakdown(bad)
        d = a.diagonal()
        rows = low.row_indices()
        on_diag = rows == low.col_idx
        alpha = 1e-3
        while True:
            shifted = low.values.copy()
            shifted[on_diag] += alpha * d[rows[on_diag]]
            sl = SparseMatrix(low.n_rows, low.n_cols, low.row_ptr.copy(), low.col_idx.copy(), shifted)
            vals, bad = _ic0_factor(sl, sl)
            if bad < 0:
                break
            alpha *= 2.0
            if alpha > max_shift:
                raise ICBreakdown(bad)
    l = SparseMatrix(low.n_rows, low.n_cols, low.row_ptr.copy(), low.col_idx.copy(), vals)
    return Preconditioner(PreconditionerKind.INCOMPLETE_CHOLESKY, n=a.n_rows, factor=l, shift=alpha)


def apply(m: Preconditioner, r) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.ndim != 1 or (m.n is not None and r.shape[0] != m.n):
        raise SparseError(f"preconditioner of size {m.n} applied to vector of shape {r.shape}")
    if m.kind is PreconditionerKind.IDENTITY:
        return r.copy()
    if m.kind is PreconditionerKind.JACOBI:
        return r / m.diagonal
    l = m.factor
    k = _backend.kernels
    y, bad = k.csr_lower_solve(l.row_ptr, l.col_idx, l.values, np.ascontiguousarray(r))
    if bad < 0:
        y, bad = k.csr_lower_t_solve(l.row_ptr, l.col_idx, l.values, y)
    if bad >= 0:
        raise SingularFactorError(bad)
    return y
