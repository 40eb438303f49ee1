"""Nearest-neighbor Gaussian process factors.

Everything here works in *ordered positions*: position ``i`` refers to the
location ``order[i]``. The precision of the latent field is
``(I - A)^T D^{-1} (I - A)`` where ``A`` is strictly lower triangular with at
most ``m`` entries per row.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .kernels import CovarianceKernel, as_locations
from .rng import RngState
from .sparse_core import (
    SparseMatrix,
    from_triplets,
    lower_tri_solve,
    matmat_t,
    scale_rows,
    spmv,
    spmv_t,
)

log = logging.getLogger(__name__)


class NngpFactorError(ArithmeticError):
    """A neighbor block could not be factorized (typically coincident locations)."""

    def __init__(self, row: int, reason: str):
        super().__init__(f"NNGP factor construction failed at ordered row {row}: {reason}")
        self.row = row


@dataclass(frozen=True, eq=False)
class NeighborSets:
    """``neighbors[i, :count[i]]`` holds the sorted earlier positions conditioning position ``i``."""

    order: np.ndarray
    neighbors: np.ndarray
    m: int
    warnings: list[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.order.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return np.minimum(np.arange(self.n), self.m)

    def of(self, i: int) -> list[int]:
        return self.neighbors[i, : min(i, self.m)].tolist()


@dataclass(frozen=True, eq=False)
class NngpFactors:
    a_matrix: SparseMatrix
    d_diag: np.ndarray
    order: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.d_diag.shape[0]


def build_order(locations) -> np.ndarray:
    """Sort by first coordinate, then second, then original index."""
    s = as_locations(locations)
    idx = np.arange(s.shape[0])
    keys = (idx,) + ((s[:, 1],) if s.shape[1] > 1 else ()) + (s[:, 0],)
    return np.lexsort(keys).astype(np.int64)


def _knn_kdtree(coords: np.ndarray, m: int) -> np.ndarray:
    """Tree-accelerated version of ``knn_earlier``; output is identical to the brute force.

    Rows whose answer certainly lies inside the ``4m + 1`` nearest points are
    resolved in bulk; rows with too few earlier candidates or a possible tie
    at the boundary fall back to an exact ball query.
    """
    from scipy.spatial import cKDTree

    n = coords.shape[0]
    out = np.full((n, m), -1, dtype=np.int64)
    if n < 2:
        return out
    tree = cKDTree(coords)
    k0 = min(n, 4 * m + 1)
    _, cand = tree.query(coords, k=k0)
    cand = np.asarray(cand, dtype=np.int64).reshape(n, -1)
    rows = np.arange(n)
    need = np.minimum(rows, m)
    # same arithmetic as the brute-force kernel so distances compare exactly
    d2 = np.zeros(cand.shape)
    for c in range(coords.shape[1]):
        diff = coords[rows, c][:, None] - coords[cand, c]
        d2 = d2 + diff * diff
    far = d2.max(axis=1)
    earlier = cand < rows[:, None]
    d2e = np.where(earlier, d2, np.inf)
    keyed = np.where(earlier, cand, n)
    # sort each row by (distance, index)
    idx = np.lexsort((keyed, d2e), axis=1)
    sd2 = np.take_along_axis(d2e, idx, axis=1)
    sc = np.take_along_axis(cand, idx, axis=1)
    n_early = earlier.sum(axis=1)
    kth = sd2[rows, np.maximum(need - 1, 0)]
    safe = (n_early >= need) & ((far > kth * (1 + 1e-9) + 1e-300) | (k0 == n)) & (need > 0)
    width = min(m, k0)
    block = sc[:, :width].copy()
    big = np.iinfo(np.int64).max
    block[np.arange(width)[None, :] >= need[:, None]] = big
    block.sort(axis=1)
    block[block == big] = -1
    out[safe, :width] = block[safe]
    for i in np.flatnonzero(~safe & (need > 0)):
        k = int(need[i])
        e = sc[i][: int(n_early[i])]
        if e.size < k:
            e = np.arange(i)
        else:
            radius2 = sd2[i, k - 1]
            ball = np.asarray(tree.query_ball_point(coords[i], np.sqrt(radius2) * (1 + 1e-9) + 1e-300),
                              dtype=np.int64)
            e = ball[ball < i]
        dd = _sqdist(coords, i, e)
        out[i, :k] = np.sort(e[np.lexsort((e, dd))[:k]])
    return out


def _sqdist(coords: np.ndarray, i: int, js: np.ndarray) -> np.ndarray:
    d2 = np.zeros(js.shape[0])
    for c in range(coords.shape[1]):
        diff = coords[i, c] - coords[js, c]
        d2 = d2 + diff * diff
    return d2


AUTO_BRUTE_MAX = 5000


def build_neighbor_sets(locations, order, m: int, search: str = "auto") -> NeighborSets:
    """Nearest ``min(i, m)`` earlier positions for every ordered position.

    ``search="brute"`` is the O(n^2) reference; ``search="kdtree"`` gives the
    same output faster on large inputs; ``"auto"`` picks brute force up to
    ``AUTO_BRUTE_MAX`` points.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    s = as_locations(locations)
    order = np.asarray(order, dtype=np.int64)
    if sorted(order.tolist()) != list(range(s.shape[0])):
        raise ValueError("order is not a permutation of the locations")
    coords = np.ascontiguousarray(s[order])
    if search == "auto":
        search = "brute" if s.shape[0] <= AUTO_BRUTE_MAX else "kdtree"
    if search == "brute":
        nb = _backend.kernels.knn_earlier(coords, m)
    elif search == "kdtree":
        nb = _knn_kdtree(coords, m)
    else:
        raise ValueError(f"unknown neighbor search {search!r}")
    warnings = [
        f"coincident locations in the neighbor set of ordered row {i}" for i in _coincident_rows(coords, nb, m)
    ]
    for w in warnings:
        log.warning(w)
    return NeighborSets(order=order, neighbors=nb, m=m, warnings=warnings)


def _coincident_rows(coords: np.ndarray, nb: np.ndarray, m: int, chunk: int = 20000) -> list[int]:
    """Ordered rows whose point-plus-neighbors set contains a repeated location."""
    n = coords.shape[0]
    found = []
    for lo in range(1, n, chunk):
        hi = min(n, lo + chunk)
        rows = np.arange(lo, hi)
        idx = np.concatenate([nb[lo:hi], rows[:, None]], axis=1)
        valid = idx >= 0
        pts = coords[np.where(valid, idx, 0)]
        diff = pts[:, :, None, :] - pts[:, None, :, :]
        same = np.all(diff == 0, axis=-1) & valid[:, :, None] & valid[:, None, :]
        same &= ~np.eye(m + 1, dtype=bool)[None]
        found.extend((rows[same.any(axis=(1, 2))]).tolist())
    return found


def _batched_cholesky_solve(c_nn: np.ndarray, c_ni: np.ndarray) -> np.ndarray:
    """Solve a stack of small SPD systems by dense Cholesky and two substitutions."""
    l = np.linalg.cholesky(c_nn)
    k = c_ni.shape[1]
    y = np.empty_like(c_ni)
    for j in range(k):
        y[:, j] = (c_ni[:, j] - np.einsum("bi,bi->b", l[:, j, :j], y[:, :j])) / l[:, j, j]
    x = np.empty_like(c_ni)
    for j in range(k - 1, -1, -1):
        x[:, j] = (y[:, j] - np.einsum("bi,bi->b", l[:, j + 1 :, j], x[:, j + 1 :])) / l[:, j, j]
    return x


def build_nngp_factors(kernel: CovarianceKernel, locations, nbrs: NeighborSets, chunk: int = 50000) -> NngpFactors:
    """Local kriging weights ``a_i`` and conditional variances ``d_i`` for every position."""
    s = as_locations(locations)
    coords = s[nbrs.order]
    n = coords.shape[0]
    counts = nbrs.counts
    d = np.full(n, kernel.sigma2)
    rows_out, cols_out, vals_out = [], [], []
    for k in np.unique(counts[counts > 0]):
        k_rows = np.flatnonzero(counts == k)
        for lo in range(0, k_rows.size, chunk):
            rows = k_rows[lo:lo + chunk]
            nb = nbrs.neighbors[rows, :k]
            pts = coords[nb]
            diff = pts[:, :, None, :] - pts[:, None, :, :]
            dist_nn = np.sqrt(np.sum(diff * diff, axis=-1))
            dup = np.flatnonzero(((dist_nn == 0) & ~np.eye(k, dtype=bool)).any(axis=(1, 2)))
            if dup.size:
                raise NngpFactorError(int(rows[dup[0]]), "coincident locations in the neighbor block")
            c_nn = kernel.of_distance(dist_nn)
            di = pts - coords[rows][:, None, :]
            dist_ni = np.sqrt(np.sum(di * di, axis=-1))
            zero = np.flatnonzero((dist_ni == 0).any(axis=1))
            if zero.size:
                raise NngpFactorError(int(rows[zero[0]]), "location coincides with one of its neighbors")
            c_ni = kernel.of_distance(dist_ni)
            try:
                a = _batched_cholesky_solve(c_nn, c_ni)
            except np.linalg.LinAlgError:
                for r, blk in zip(rows, c_nn):
                    try:
                        np.linalg.cholesky(blk)
                    except np.linalg.LinAlgError:
                        raise NngpFactorError(int(r), "singular neighbor covariance block") from None
                raise
            dk = kernel.sigma2 - np.einsum("bi,bi->b", c_ni, a)
            bad = np.flatnonzero(~(dk > 0))
            if bad.size:
                raise NngpFactorError(int(rows[bad[0]]), f"non-positive conditional variance {dk[bad[0]]:.3g}")
            d[rows] = dk
            rows_out.append(np.repeat(rows, k))
            cols_out.append(nb.ravel())
            vals_out.append(a.ravel())
    if rows_out:
        a_mat = from_triplets(None, n, n, np.concatenate(rows_out), np.concatenate(cols_out), np.concatenate(vals_out))
    else:
        a_mat = from_triplets(None, n, n, [], [], [])
    return NngpFactors(a_matrix=a_mat, d_diag=d, order=nbrs.order)


def nngp(kernel: CovarianceKernel, locations, m: int, order=None, search: str = "auto") -> NngpFactors:
    """Convenience: ordering, neighbor search and factor construction in one call."""
    if order is None:
        order = build_order(locations)
    nbrs = build_neighbor_sets(locations, order, m, search=search)
    return build_nngp_factors(kernel, locations, nbrs)


def precision_matvec(f: NngpFactors, v) -> np.ndarray:
    """(I - A)^T D^{-1} (I - A) v in three sparse passes."""
    v = np.asarray(v, dtype=np.float64)
    t = (v - spmv(f.a_matrix, v)) / f.d_diag
    return t - spmv_t(f.a_matrix, t)


def sqrt_precision(f: NngpFactors) -> SparseMatrix:
    """D^{-1/2} (I - A), the square-root factor of the precision."""
    n = f.n
    a = f.a_matrix
    rows = np.concatenate([a.row_indices(), np.arange(n)])
    cols = np.concatenate([a.col_idx, np.arange(n)])
    vals = np.concatenate([-a.values, np.ones(n)])
    b = from_triplets(None, n, n, rows, cols, vals)
    return scale_rows(b, 1.0 / np.sqrt(f.d_diag))


def assemble_precision(f: NngpFactors) -> SparseMatrix:
    """Explicit (I - A)^T D^{-1} (I - A); exactly symmetric by construction."""
    r = sqrt_precision(f)
    return matmat_t(r, r)


def simulate_latent(f: NngpFactors, rng: RngState) -> np.ndarray:
    """One draw of w ~ N(0, C_nngp) in ordered positions: w = (I - A)^{-1} D^{1/2} z."""
    n = f.n
    z = rng.normals(n)
    a = f.a_matrix
    b = from_triplets(
        None, n, n,
        np.concatenate([a.row_indices(), np.arange(n)]),
        np.concatenate([a.col_idx, np.arange(n)]),
        np.concatenate([-a.values, np.ones(n)]),
    )
    return lower_tri_solve(b, np.sqrt(f.d_diag) * z)
