"""Compressed sparse row storage and the primitives every solver builds on."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _backend

DENSE_GUARD = 10**6


class SparseError(ValueError):
    """Malformed sparse input (bad indices, shapes or dimensions)."""


class SingularFactorError(ArithmeticError):
    """A triangular factor has a zero or missing diagonal entry."""

    def __init__(self, row: int):
        super().__init__(f"zero or missing diagonal in triangular factor at row {row}")
        self.row = row


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Canonical CSR matrix: rows sorted, no duplicate columns, float64 values.

    Instances are treated as immutable; the underlying arrays are marked
    read-only on construction.
    """

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for arr in (self.row_ptr, self.col_idx, self.values):
            arr.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (COO row array)."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_ptr))

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.shape))
        rows = self.row_indices()
        on = rows == self.col_idx
        d[rows[on]] = self.values[on]
        return d

    def has_full_diagonal(self) -> bool:
        rows = self.row_indices()
        present = np.zeros(min(self.shape), dtype=bool)
        present[rows[rows == self.col_idx]] = True
        return bool(present.all())

    def lower(self) -> "SparseMatrix":
        """Lower triangle including the diagonal."""
        return self._select(self.col_idx <= self.row_indices())

    def upper(self) -> "SparseMatrix":
        return self._select(self.col_idx >= self.row_indices())

    def _select(self, keep: np.ndarray) -> "SparseMatrix":
        rows = self.row_indices()[keep]
        ptr = np.zeros(self.n_rows + 1, dtype=np.int64)
        np.cumsum(np.bincount(rows, minlength=self.n_rows), out=ptr[1:])
        return SparseMatrix(self.n_rows, self.n_cols, ptr, self.col_idx[keep].copy(), self.values[keep].copy())

    def __matmul__(self, x):
        return spmv(self, x)

    def __repr__(self) -> str:
        return f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


def from_triplets(entries: Iterable[tuple[int, int, float]] | None, n_rows: int, n_cols: int,
                  rows=None, cols=None, vals=None) -> SparseMatrix:
    """Assemble canonical CSR from (row, col, value) triplets, summing duplicates.

    Triplets may be given as an iterable of tuples or, for bulk assembly,
    as parallel ``rows``/``cols``/``vals`` arrays with ``entries=None``.
    """
    if entries is not None:
        trip = list(entries)
        rows = np.array([t[0] for t in trip], dtype=np.int64)
        cols = np.array([t[1] for t in trip], dtype=np.int64)
        vals = np.array([t[2] for t in trip], dtype=np.float64)
    else:
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=np.float64).ravel()
    if n_rows < 0 or n_cols < 0:
        raise SparseError("negative matrix dimension")
    if not (rows.shape == cols.shape == vals.shape):
        raise SparseError("row, column and value arrays differ in length")
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_rows:
            raise SparseError(f"row index out of range for {n_rows} rows")
        if cols.min() < 0 or cols.max() >= n_cols:
            raise SparseError(f"column index out of range for {n_cols} columns")
    key = rows * max(n_cols, 1) + cols
    order = np.argsort(key, kind="stable")
    key = key[order]
    uniq, start = np.unique(key, return_index=True)
    summed = np.add.reduceat(vals[order], start) if key.size else np.zeros(0)
    urows = uniq // max(n_cols, 1)
    ucols = uniq % max(n_cols, 1)
    ptr = np.zeros(n_rows + 1, dtype=np.int64)
    np.cumsum(np.bincount(urows, minlength=n_rows), out=ptr[1:])
    return SparseMatrix(n_rows, n_cols, ptr, ucols.astype(np.int64), summed.astype(np.float64))


def from_dense(a, tol: float = 0.0) -> SparseMatrix:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise SparseError("expected a 2-D array")
    r, c = np.nonzero(np.abs(a) > tol)
    return from_triplets(None, a.shape[0], a.shape[1], r, c, a[r, c])


def identity(n: int, scale: float = 1.0) -> SparseMatrix:
    idx = np.arange(n, dtype=np.int64)
    return SparseMatrix(n, n, np.arange(n + 1, dtype=np.int64), idx, np.full(n, float(scale)))


def diag(values) -> SparseMatrix:
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    return SparseMatrix(n, n, np.arange(n + 1, dtype=np.int64), np.arange(n, dtype=np.int64), v.copy())


def _vec(x, n: int, what: str) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != n:
        raise SparseError(f"{what}: expected vector of length {n}, got shape {x.shape}")
    return x


def spmv(a: SparseMatrix, x) -> np.ndarray:
    """y = A x."""
    x = _vec(x, a.n_cols, "spmv")
    return _backend.kernels.csr_matvec(a.row_ptr, a.col_idx, a.values, x)


def spmv_t(a: SparseMatrix, x) -> np.ndarray:
    """y = A^T x without materializing the transpose."""
    x = _vec(x, a.n_rows, "spmv_t")
    return _backend.kernels.csr_rmatvec(a.row_ptr, a.col_idx, a.values, x, a.n_cols)


def transpose(a: SparseMatrix) -> SparseMatrix:
    rows = a.row_indices()
    order = np.lexsort((rows, a.col_idx))
    ptr = np.zeros(a.n_cols + 1, dtype=np.int64)
    np.cumsum(np.bincount(a.col_idx, minlength=a.n_cols), out=ptr[1:])
    return SparseMatrix(a.n_cols, a.n_rows, ptr, rows[order].copy(), a.values[order].copy())


def _square(a: SparseMatrix, b, what: str) -> np.ndarray:
    if a.n_rows != a.n_cols:
        raise SparseError(f"{what}: matrix must be square, got {a.shape}")
    return _vec(b, a.n_rows, what)


def lower_tri_solve(l: SparseMatrix, b) -> np.ndarray:
    """Forward substitution; only the lower triangle of ``l`` may be stored."""
    b = _square(l, b, "lower_tri_solve")
    if np.any(l.col_idx > l.row_indices()):
        raise SparseError("lower_tri_solve: matrix has entries above the diagonal")
    x, bad = _backend.kernels.csr_lower_solve(l.row_ptr, l.col_idx, l.values, b)
    if bad >= 0:
        raise SingularFactorError(bad)
    return x


def upper_tri_solve(u: SparseMatrix, b) -> np.ndarray:
    """Back substitution; only the upper triangle of ``u`` may be stored."""
    b = _square(u, b, "upper_tri_solve")
    if np.any(u.col_idx < u.row_indices()):
        raise SparseError("upper_tri_solve: matrix has entries below the diagonal")
    x, bad = _backend.kernels.csr_upper_solve(u.row_ptr, u.col_idx, u.values, b)
    if bad >= 0:
        raise SingularFactorError(bad)
    return x


def lower_t_solve(l: SparseMatrix, b) -> np.ndarray:
    """Solve L^T x = b given lower-triangular ``l`` (no transpose is formed)."""
    b = _square(l, b, "lower_t_solve")
    if np.any(l.col_idx > l.row_indices()):
        raise SparseError("lower_t_solve: matrix has entries above the diagonal")
    x, bad = _backend.kernels.csr_lower_t_solve(l.row_ptr, l.col_idx, l.values, b)
    if bad >= 0:
        raise SingularFactorError(bad)
    return x


def to_dense(a: SparseMatrix, max_entries: int = DENSE_GUARD) -> np.ndarray:
    if a.n_rows * a.n_cols > max_entries:
        raise SparseError(f"to_dense: {a.n_rows}x{a.n_cols} exceeds the {max_entries}-entry guard")
    out = np.zeros(a.shape)
    out[a.row_indices(), a.col_idx] = a.values
    return out


def hstack(blocks: list[SparseMatrix]) -> SparseMatrix:
    n = blocks[0].n_rows
    rows, cols, vals, off = [], [], [], 0
    for b in blocks:
        if b.n_rows != n:
            raise SparseError("hstack: row counts differ")
        rows.append(b.row_indices())
        cols.append(b.col_idx + off)
        vals.append(b.values)
        off += b.n_cols
    return from_triplets(None, n, off, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


def vstack(blocks: list[SparseMatrix]) -> SparseMatrix:
    m = blocks[0].n_cols
    rows, cols, vals, off = [], [], [], 0
    for b in blocks:
        if b.n_cols != m:
            raise SparseError("vstack: column counts differ")
        rows.append(b.row_indices() + off)
        cols.append(b.col_idx)
        vals.append(b.values)
        off += b.n_rows
    return from_triplets(None, off, m, np.concatenate(rows), np.concatenate(cols), np.concatenate(vals))


def add(a: SparseMatrix, b: SparseMatrix, alpha: float = 1.0, beta: float = 1.0) -> SparseMatrix:
    if a.shape != b.shape:
        raise SparseError("add: shapes differ")
    return from_triplets(
        None, a.n_rows, a.n_cols,
        np.concatenate([a.row_indices(), b.row_indices()]),
        np.concatenate([a.col_idx, b.col_idx]),
        np.concatenate([alpha * a.values, beta * b.values]),
    )


def scale_rows(a: SparseMatrix, s) -> SparseMatrix:
    s = np.asarray(s, dtype=np.float64)
    return SparseMatrix(a.n_rows, a.n_cols, a.row_ptr.copy(), a.col_idx.copy(), a.values * s[a.row_indices()])


def matmat_t(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """A^T B for CSR operands sharing a row dimension."""
    if a.n_rows != b.n_rows:
        raise SparseError("matmat_t: row counts differ")
    ra = a.row_indices()
    cnt_b = np.diff(b.row_ptr)
    reps = cnt_b[ra]
    total = int(reps.sum())
    pa = np.repeat(np.arange(a.nnz), reps)
    block_start = np.repeat(np.cumsum(reps) - reps, reps)
    pb = b.row_ptr[ra][pa] + (np.arange(total) - block_start)
    return from_triplets(None, a.n_cols, b.n_cols, a.col_idx[pa], b.col_idx[pb], a.values[pa] * b.values[pb])
