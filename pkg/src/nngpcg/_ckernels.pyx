# cython: language_level=3
"""Compiled inner loops. Mirrors ``_pykernels`` function for function."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt, isfinite
from libc.stdint cimport int64_t

cnp.import_array()


def csr_matvec(const int64_t[::1] indptr, const int64_t[::1] indices,
               const double[::1] data, const double[::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double s
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    with nogil:
        for i in range(n):
            s = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                s = s + data[p] * x[indices[p]]
            y[i] = s
    return out


def csr_rmatvec(const int64_t[::1] indptr, const int64_t[::1] indices,
                const double[::1] data, const double[::1] x, Py_ssize_t n_cols):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double xi
    out = np.zeros(n_cols, dtype=np.float64)
    cdef double[::1] y = out
    with nogil:
        for i in range(n):
            xi = x[i]
            if xi != 0.0:
                for p in range(indptr[i], indptr[i + 1]):
                    y[indices[p]] += data[p] * xi
    return out


def csr_lower_solve(const int64_t[::1] indptr, const int64_t[::1] indices,
                    const double[::1] data, const double[::1] b):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, p, last
    cdef double s, diag
    cdef Py_ssize_t bad = -1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out
    with nogil:
        for i in range(n):
            last = indptr[i + 1] - 1
            if last < indptr[i] or indices[last] != i or data[last] == 0.0:
                bad = i
                break
            s = b[i]
            for p in range(indptr[i], last):
                s = s - data[p] * x[indices[p]]
            x[i] = s / data[last]
    return out, bad


def csr_upper_solve(const int64_t[::1] indptr, const int64_t[::1] indices,
                    const double[::1] data, const double[::1] b):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, p, first
    cdef double s
    cdef Py_ssize_t bad = -1
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out
    with nogil:
        for i in range(n - 1, -1, -1):
            first = indptr[i]
            if first >= indptr[i + 1] or indices[first] != i or data[first] == 0.0:
                bad = i
                break
            s = b[i]
            for p in range(first + 1, indptr[i + 1]):
                s = s - data[p] * x[indices[p]]
            x[i] = s / data[first]
    return out, bad


def csr_lower_t_solve(const int64_t[::1] indptr, const int64_t[::1] indices,
                      const double[::1] data, const double[::1] b):
    """Solve L^T x = b with L stored as lower-triangular CSR."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, p, last
    cdef double xi
    cdef Py_ssize_t bad = -1
    out = np.array(b, dtype=np.float64, copy=True)
    cdef double[::1] x = out
    with nogil:
        for i in range(n - 1, -1, -1):
            last = indptr[i + 1] - 1
            if last < indptr[i] or indices[last] != i or data[last] == 0.0:
                bad = i
                break
            xi = x[i] / data[last]
            x[i] = xi
            for p in range(indptr[i], last):
                x[indices[p]] -= data[p] * xi
    return out, bad


def etree(const int64_t[::1] indptr, const int64_t[::1] indices):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t k, p, i, inext
    parent_arr = np.full(n, -1, dtype=np.int64)
    ancestor_arr = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] parent = parent_arr
    cdef int64_t[::1] ancestor = ancestor_arr
    with nogil:
        for k in range(n):
            for p in range(indptr[k], indptr[k + 1]):
                i = indices[p]
                while i != -1 and i < k:
                    inext = ancestor[i]
                    ancestor[i] = k
                    if inext == -1:
                        parent[i] = k
                    i = inext
    return parent_arr


def symbolic_pattern(const int64_t[::1] indptr, const int64_t[::1] indices,
                     const int64_t[::1] parent):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t k, p, i, total
    mark_arr = np.full(n, -1, dtype=np.int64)
    cdef int64_t[::1] mark = mark_arr
    counts_arr = np.zeros(n + 1, dtype=np.int64)
    cdef int64_t[::1] lp = counts_arr
    # first pass: row counts
    with nogil:
        for k in range(n):
            mark[k] = k
            total = 1
            for p in range(indptr[k], indptr[k + 1]):
                i = indices[p]
                while i < k and mark[i] != k:
                    mark[i] = k
                    total += 1
                    i = parent[i]
            lp[k + 1] = lp[k] + total
    li_arr = np.empty(lp[n], dtype=np.int64)
    cdef int64_t[::1] li = li_arr
    cdef Py_ssize_t pos
    mark_arr[:] = -1
    with nogil:
        for k in range(n):
            mark[k] = k
            pos = lp[k]
            for p in range(indptr[k], indptr[k + 1]):
                i = indices[p]
                while i < k and mark[i] != k:
                    mark[i] = k
                    li[pos] = i
                    pos += 1
                    i = parent[i]
            li[pos] = k
    for k in range(n):
        li_arr[lp[k]:lp[k + 1]].sort()
    return counts_arr, li_arr


def chol_on_pattern(const int64_t[::1] a_indptr, const int64_t[::1] a_indices,
                    const double[::1] a_data, const int64_t[::1] l_indptr,
                    const int64_t[::1] l_indices):
    """Cholesky values restricted to a given lower pattern (diagonal last per row).

    With the full symbolic pattern this is the exact factor; with the lower
    pattern of A it is IC(0).
    """
    cdef Py_ssize_t n = a_indptr.shape[0] - 1
    cdef Py_ssize_t k, p, q, r, j, dpos
    cdef double s, v, d
    cdef Py_ssize_t bad = -1
    ldata_arr = np.zeros(l_indices.shape[0], dtype=np.float64)
    cdef double[::1] ld = ldata_arr
    w_arr = np.zeros(n, dtype=np.float64)
    x_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef double[::1] x = x_arr
    with nogil:
        for k in range(n):
            for p in range(a_indptr[k], a_indptr[k + 1]):
                j = a_indices[p]
                if j <= k:
                    x[j] += a_data[p]
            dpos = l_indptr[k + 1] - 1
            if dpos < l_indptr[k] or l_indices[dpos] != k:
                bad = k
                break
            d = x[k]
            for q in range(l_indptr[k], dpos):
                j = l_indices[q]
                s = x[j]
                for r in range(l_indptr[j], l_indptr[j + 1] - 1):
                    s = s - w[l_indices[r]] * ld[r]
                v = s / ld[l_indptr[j + 1] - 1]
                ld[q] = v
                w[j] = v
                d = d - v * v
            if not (d > 0.0) or not isfinite(d):
                bad = k
                break
            ld[dpos] = sqrt(d)
            for q in range(l_indptr[k], l_indptr[k + 1]):
                w[l_indices[q]] = 0.0
                x[l_indices[q]] = 0.0
            for p in range(a_indptr[k], a_indptr[k + 1]):
                x[a_indices[p]] = 0.0
    return ldata_arr, bad


def knn_earlier(const double[:, ::1] coords, Py_ssize_t m):
    """For each row i, the min(i, m) nearest rows j < i by squared distance, ties to lower j."""
    cdef Py_ssize_t n = coords.shape[0]
    cdef Py_ssize_t dim = coords.shape[1]
    cdef Py_ssize_t i, j, c, cnt, pos, t
    cdef double d2, diff
    out_arr = np.full((n, m), -1, dtype=np.int64)
    cdef int64_t[:, ::1] out = out_arr
    bd_arr = np.empty(m, dtype=np.float64)
    bi_arr = np.empty(m, dtype=np.int64)
    cdef double[::1] bd = bd_arr
    cdef int64_t[::1] bi = bi_arr
    with nogil:
        for i in range(n):
            cnt = 0
            for j in range(i):
                d2 = 0.0
                for c in range(dim):
                    diff = coords[i, c] - coords[j, c]
                    d2 = d2 + diff * diff
                if cnt == m and not (d2 < bd[m - 1]):
                    continue
                pos = cnt if cnt < m else m - 1
                while pos > 0 and bd[pos - 1] > d2:
                    if pos < m:
                        bd[pos] = bd[pos - 1]
                        bi[pos] = bi[pos - 1]
                    pos -= 1
                bd[pos] = d2
                bi[pos] = j
                if cnt < m:
                    cnt += 1
            for t in range(cnt):
                out[i, t] = bi[t]
    for i in range(n):
        row = out_arr[i]
        cnt = min(i, m)
        row[:cnt].sort()
    return out_arr
