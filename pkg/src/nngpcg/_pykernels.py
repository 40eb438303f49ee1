"""Pure-Python/NumPy versions of the compiled kernels in ``_ckernels.pyx``.

Every function here has the same signature and return convention as its
compiled twin, so the two are interchangeable behind ``nngpcg._backend``.
Triangular solves and factorizations return ``(result, bad)`` where ``bad``
is ``-1`` on success or the offending row index.
"""

from __future__ import annotations

from math import isfinite, sqrt

import numpy as np


def csr_matvec(indptr, indices, data, x):
    n = indptr.shape[0] - 1
    if data.shape[0] == 0:
        return np.zeros(n)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=n).astype(np.float64)


def csr_rmatvec(indptr, indices, data, x, n_cols):
    n = indptr.shape[0] - 1
    if data.shape[0] == 0:
        return np.zeros(n_cols)
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(indices, weights=data * x[rows], minlength=n_cols).astype(np.float64)


def csr_lower_solve(indptr, indices, data, b):
    n = indptr.shape[0] - 1
    ip, ix, dv = indptr.tolist(), indices.tolist(), data.tolist()
    bb = b.tolist()
    x = [0.0] * n
    for i in range(n):
        last = ip[i + 1] - 1
        if last < ip[i] or ix[last] != i or dv[last] == 0.0:
            return np.array(x), i
        s = bb[i]
        for p in range(ip[i], last):
            s -= dv[p] * x[ix[p]]
        x[i] = s / dv[last]
    return np.array(x, dtype=np.float64), -1


def csr_upper_solve(indptr, indices, data, b):
    n = indptr.shape[0] - 1
    ip, ix, dv = indptr.tolist(), indices.tolist(), data.tolist()
    bb = b.tolist()
    x = [0.0] * n
    for i in range(n - 1, -1, -1):
        first = ip[i]
        if first >= ip[i + 1] or ix[first] != i or dv[first] == 0.0:
            return np.array(x), i
        s = bb[i]
        for p in range(first + 1, ip[i + 1]):
            s -= dv[p] * x[ix[p]]
        x[i] = s / dv[first]
    return np.array(x, dtype=np.float64), -1


def csr_lower_t_solve(indptr, indices, data, b):
    n = indptr.shape[0] - 1
    ip, ix, dv = indptr.tolist(), indices.tolist(), data.tolist()
    x = b.tolist()
    for i in range(n - 1, -1, -1):
        last = ip[i + 1] - 1
        if last < ip[i] or ix[last] != i or dv[last] == 0.0:
            return np.array(x), i
        xi = x[i] / dv[last]
        x[i] = xi
        for p in range(ip[i], last):
            x[ix[p]] -= dv[p] * xi
    return np.array(x, dtype=np.float64), -1


def etree(indptr, indices):
    n = indptr.shape[0] - 1
    ip, ix = indptr.tolist(), indices.tolist()
    parent = [-1] * n
    ancestor = [-1] * n
    for k in range(n):
        for p in range(ip[k], ip[k + 1]):
            i = ix[p]
            while i != -1 and i < k:
                inext = ancestor[i]
                ancestor[i] = k
                if inext == -1:
                    parent[i] = k
                i = inext
    return np.array(parent, dtype=np.int64)


def symbolic_pattern(indptr, indices, parent):
    n = indptr.shape[0] - 1
    ip, ix, par = indptr.tolist(), indices.tolist(), parent.tolist()
    mark = [-1] * n
    rows = []
    for k in range(n):
        mark[k] = k
        row = []
        for p in range(ip[k], ip[k + 1]):
            i = ix[p]
            while i < k and mark[i] != k:
                mark[i] = k
                row.append(i)
                i = par[i]
        row.sort()
        row.append(k)
        rows.append(row)
    lp = np.zeros(n + 1, dtype=np.int64)
    lp[1:] = np.cumsum([len(r) for r in rows])
    li = np.array([j for r in rows for j in r], dtype=np.int64)
    return lp, li


def chol_on_pattern(a_indptr, a_indices, a_data, l_indptr, l_indices):
    n = a_indptr.shape[0] - 1
    aip, aix, adv = a_indptr.tolist(), a_indices.tolist(), a_data.tolist()
    lip, lix = l_indptr.tolist(), l_indices.tolist()
    ld = [0.0] * len(lix)
    w = [0.0] * n
    x = [0.0] * n
    for k in range(n):
        for p in range(aip[k], aip[k + 1]):
            j = aix[p]
            if j <= k:
                x[j] += adv[p]
        dpos = lip[k + 1] - 1
        if dpos < lip[k] or lix[dpos] != k:
            return np.array(ld), k
        d = x[k]
        for q in range(lip[k], dpos):
            j = lix[q]
            s = x[j]
            for r in range(lip[j], lip[j + 1] - 1):
                s -= w[lix[r]] * ld[r]
            v = s / ld[lip[j + 1] - 1]
            ld[q] = v
            w[j] = v
            d -= v * v
        if not (d > 0.0) or not isfinite(d):
            return np.array(ld), k
        ld[dpos] = sqrt(d)
        for q in range(lip[k], lip[k + 1]):
            w[lix[q]] = 0.0
            x[lix[q]] = 0.0
        for p in range(aip[k], aip[k + 1]):
            x[aix[p]] = 0.0
    return np.array(ld, dtype=np.float64), -1


def knn_earlier(coords, m):
    n, dim = coords.shape
    out = np.full((n, m), -1, dtype=np.int64)
    for i in range(1, n):
        d2 = np.zeros(i)
        for c in range(dim):
            diff = coords[i, c] - coords[:i, c]
            d2 = d2 + diff * diff
        k = min(i, m)
        sel = np.lexsort((np.arange(i), d2))[:k]
        out[i, :k] = np.sort(sel)
    return out
