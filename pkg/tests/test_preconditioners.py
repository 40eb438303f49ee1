import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nngpcg.kernels import CovarianceKernel
from nngpcg.nngp import assemble_precision, nngp
from nngpcg.preconditioners import (
    ICBreakdown,
    PreconditionerError,
    PreconditionerKind,
    apply,
    ic0_build,
    identity_build,
    jacobi_build,
)
from nngpcg.solvers import SolverConfig, numeric_cholesky, pcg_solve, symbolic_cholesky
from nngpcg.sparse_core import SparseError, add, diag, from_dense, from_triplets, to_dense


def nngp_system(n, delta2=0.1, m=10, seed=0):
    locs = np.random.default_rng(seed).random((n, 2))
    q = assemble_precision(nngp(CovarianceKernel(1.0, 7.0), locs, m))
    return add(q, diag(np.full(n, 1 / delta2)))


def tridiag(n):
    return from_dense(np.diag(np.full(n, 4.0)) + np.diag(np.full(n - 1, -1.0), 1) + np.diag(np.full(n - 1, -1.0), -1))


def test_identity(nprng):
    r = nprng.standard_normal(7)
    m = identity_build(7)
    assert m.kind is PreconditionerKind.IDENTITY
    out = m.apply(r)
    assert np.array_equal(out, r) and out is not r
    with pytest.raises(SparseError):
        m.apply(np.ones(3))


def test_jacobi_example():
    m = jacobi_build(from_dense(np.diag([2.0, 4.0])))
    assert np.array_equal(apply(m, [1.0, 1.0]), [0.5, 0.25])


@pytest.mark.parametrize("d", [[1.0, 0.0], [1.0, -2.0]])
def test_jacobi_rejects_bad_diagonal(d):
    with pytest.raises(PreconditionerError):
        jacobi_build(from_dense(np.diag(d)))


def test_jacobi_rejects_missing_diagonal():
    with pytest.raises(PreconditionerError):
        jacobi_build(from_triplets([(0, 1, 1.0), (1, 0, 1.0), (0, 0, 1.0)], 2, 2))


def test_jacobi_on_nngp_precision(nprng):
    a = nngp_system(100)
    r = nprng.standard_normal(100)
    d = np.diag(to_dense(a))
    assert np.max(np.abs(apply(jacobi_build(a), r) - r / d)) <= 1e-14 * np.max(np.abs(r / d))


def test_ic0_diagonal(backend):
    m = ic0_build(from_dense(np.diag([4.0, 9.0])))
    assert np.allclose(to_dense(m.factor), np.diag([2.0, 3.0]), atol=1e-15)
    assert m.shift == 0.0


def test_ic0_on_tridiagonal_is_exact(backend, nprng):
    a = tridiag(30)
    m = ic0_build(a)
    exact = numeric_cholesky(a, symbolic_cholesky(a))
    assert np.max(np.abs(to_dense(m.factor) - to_dense(exact))) <= 1e-12
    r = nprng.standard_normal(30)
    assert np.max(np.abs(m.apply(r) - np.linalg.solve(to_dense(a), r))) <= 1e-10


def test_ic0_breakdown_and_shift(backend):
    a = from_dense([[1.0, 2.0], [2.0, 1.0]])
    with pytest.raises(ICBreakdown) as err:
        ic0_build(a)
    assert err.value.pivot == 1
    m = ic0_build(a, shift_on_breakdown=True)
    assert m.shift > 0
    # recorded alpha is the one that succeeded: a + alpha diag(a) is factorable
    l = to_dense(m.factor)
    assert np.allclose(l @ l.T, [[1 + m.shift, 2.0], [2.0, 1 + m.shift]])
    with pytest.raises(ICBreakdown):
        ic0_build(from_dense([[-1.0, 0.0], [0.0, 1.0]]), shift_on_breakdown=True, max_shift=1.0)


def test_ic0_values_only_on_pattern(backend):
    a = nngp_system(200)
    l = ic0_build(a).factor
    assert np.array_equal(l.row_ptr, a.lower().row_ptr)
    assert np.array_equal(l.col_idx, a.lower().col_idx)


def test_pcg_ic0_vs_jacobi_on_nngp(backend):
    n = 500
    a = nngp_system(n, delta2=0.01, seed=3)
    b = np.random.default_rng(4).standard_normal(n)
    cfg = SolverConfig(tol=1e-10)
    x1, r1 = pcg_solve(a, ic0_build(a), b, cfg)
    x2, r2 = pcg_solve(a, jacobi_build(a), b, cfg)
    assert r1.converged and r2.converged
    assert np.max(np.abs(x1 - x2)) <= 1e-6
    assert r1.iterations <= r2.iterations


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 60), st.floats(0.01, 1.0), st.integers(0, 2**32 - 1), st.sampled_from(["jacobi", "ic0"]))
def test_preconditioner_linear_symmetric_positive(n, delta2, seed, kind):
    a = nngp_system(n, delta2=delta2, m=5, seed=seed)
    m = jacobi_build(a) if kind == "jacobi" else ic0_build(a, shift_on_breakdown=True)
    rng = np.random.default_rng(seed)
    r, s = rng.standard_normal(n), rng.standard_normal(n)
    c1, c2 = rng.uniform(-2, 2, 2)
    lhs = m.apply(c1 * r + c2 * s)
    rhs = c1 * m.apply(r) + c2 * m.apply(s)
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(rhs)))
    # M^{-1} is symmetric: s^T M^{-1} r = r^T M^{-1} s
    sr, rs = s @ m.apply(r), r @ m.apply(s)
    assert abs(sr - rs) <= 1e-10 * max(1.0, abs(sr))
    assert r @ m.apply(r) > 0
