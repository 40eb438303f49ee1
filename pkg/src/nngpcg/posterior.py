"""Exact conjugate Normal-Inverse-Gamma posterior for NNGP spatial regression.

Unknowns are ``gamma = [beta (p); w (n)]``. The stacked least-squares form is

    X* = [ X/delta        I/delta         ]     y* = [ y/delta          ]
         [ 0              D^-1/2 (I - A)  ]          [ 0                ]
         [ L_beta^-1      0               ]          [ L_beta^-1 mu_beta ]

(the last block only for an informative beta prior), so that
``X*^T X* = V*^{-1}`` and ``X*^T y* = V^{-1} mu + [X : I]^T y / delta^2``.
Every linear solve goes through :func:`solve_normal`, which accepts a
row-space vector ``u`` and returns the solution of ``X*^T X* v = X*^T u``.

Inputs to :func:`assemble_stacked` must already be in the NNGP ordering;
:func:`fit` takes care of the permutation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import nngp as nngp_mod
from .kernels import CovarianceKernel
from .nngp import NngpFactors, assemble_precision, precision_matvec, sqrt_precision
from .preconditioners import ic0_build, identity_build, jacobi_build
from .rng import RngState, inverse_gamma_variate
from .solvers import (
    LinearOperator,
    SolveReport,
    SolverConfig,
    cg_solve,
    cgls_solve,
    dense_solve,
    densify,
    pcg_solve,
    symbolic_cholesky_solve,
)
from .sparse_core import SparseMatrix, add, diag, from_dense, from_triplets, hstack, spmv_t, transpose, vstack

METHODS = ("cgsparse", "identity-pcg", "dense", "jacobi-pcg", "ic0-pcg", "cgls", "symbolic-cholesky")

ALIASES = {
    "cg": "cgsparse",
    "identity": "identity-pcg",
    "pcg-identity": "identity-pcg",
    "jacobi": "jacobi-pcg",
    "pcg-jacobi": "jacobi-pcg",
    "diagonal": "jacobi-pcg",
    "ic0": "ic0-pcg",
    "pcg-ic0": "ic0-pcg",
    "cholesky": "symbolic-cholesky",
}

DEFAULT_TOL = 1e-10


class PosteriorError(ArithmeticError):
    pass


def canonical_method(name: str) -> str:
    key = name.strip().lower()
    key = ALIASES.get(key, key)
    if key not in METHODS:
        valid = ", ".join(sorted(set(METHODS) | set(ALIASES)))
        raise ValueError(f"unknown method {name!r}; valid names: {valid}")
    return key


@dataclass(frozen=True)
class NigPrior:
    """NIG prior on (beta, sigma^2). ``v_beta=None`` is the flat (zero-precision) beta prior."""

    a: float = 2.0
    b: float = 1.0
    mu_beta: np.ndarray | None = None
    v_beta: np.ndarray | None = None

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("inverse-gamma prior needs a > 0 and b > 0")
        if self.v_beta is not None:
            v = np.asarray(self.v_beta, dtype=np.float64)
            if v.ndim != 2 or v.shape[0] != v.shape[1] or not np.allclose(v, v.T):
                raise ValueError("v_beta must be a symmetric square matrix")
            try:
                np.linalg.cholesky(v)
            except np.linalg.LinAlgError:
                raise ValueError("v_beta is not positive definite") from None

    @property
    def flat(self) -> bool:
        return self.v_beta is None

    def sqrt_precision(self, p: int) -> tuple[np.ndarray, np.ndarray]:
        """(L_beta^{-1}, L_beta^{-1} mu_beta) for V_beta = L_beta L_beta^T."""
        v = np.asarray(self.v_beta, dtype=np.float64)
        if v.shape != (p, p):
            raise ValueError(f"v_beta must be {p}x{p}")
        mu = np.zeros(p) if self.mu_beta is None else np.asarray(self.mu_beta, dtype=np.float64)
        l = np.linalg.cholesky(v)
        linv = np.linalg.solve(l, np.eye(p))
        return linv, linv @ mu


@dataclass(eq=False)
class StackedSystem:
    normal_operator: LinearOperator
    normal_matrix: SparseMatrix
    rhs: np.ndarray
    stacked_design: SparseMatrix
    stacked_response: np.ndarray
    n: int
    p: int
    delta2: float
    x: np.ndarray
    factors: NngpFactors
    _dense: np.ndarray | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.n + self.p

    @property
    def n_rows(self) -> int:
        return self.stacked_design.n_rows

    def dense_normal(self) -> np.ndarray:
        """Dense copy of the normal matrix, cached (for the dense method)."""
        if self._dense is None:
            self._dense = densify(self.normal_matrix)
        return self._dense

    def rhs_from_rows(self, u) -> np.ndarray:
        return spmv_t(self.stacked_design, u)


def assemble_stacked(x, y, f: NngpFactors, delta2: float, prior: NigPrior | None = None) -> StackedSystem:
    prior = prior or NigPrior()
    if not delta2 > 0:
        raise ValueError(f"delta2 must be positive, got {delta2}")
    y = np.asarray(y, dtype=np.float64).ravel()
    n = y.shape[0]
    x = np.zeros((n, 0)) if x is None else np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != n or f.n != n:
        raise ValueError(f"dimension mismatch: X {x.shape}, y ({n},), factors n={f.n}")
    p = x.shape[1]
    s = 1.0 / np.sqrt(delta2)

    data_rows = hstack([from_dense(x * s) if p else from_triplets(None, n, 0, [], [], []), diag(np.full(n, s))])
    r = sqrt_precision(f)
    latent_rows = hstack([from_triplets(None, n, p, [], [], []), r])
    blocks = [data_rows, latent_rows]
    resp = [y * s, np.zeros(n)]
    prior_prec = np.zeros((p, p))
    if not prior.flat and p:
        linv, lmu = prior.sqrt_precision(p)
        blocks.append(hstack([from_dense(linv), from_triplets(None, p, n, [], [], [])]))
        resp.append(lmu)
        prior_prec = linv.T @ linv
        prior_prec = 0.5 * (prior_prec + prior_prec.T)
    design = vstack(blocks)
    response = np.concatenate(resp)

    inv_d2 = 1.0 / delta2
    xtx = x.T @ x
    top_left = inv_d2 * 0.5 * (xtx + xtx.T) + prior_prec
    tl = from_dense(top_left) if p else from_triplets(None, 0, 0, [], [], [])
    off = from_dense(inv_d2 * x.T) if p else from_triplets(None, 0, n, [], [], [])
    br = add(assemble_precision(f), diag(np.full(n, inv_d2)))
    if p:
        normal = vstack([hstack([tl, off]), hstack([transpose(off), br])])
    else:
        normal = br

    def matvec(v):
        v = np.asarray(v, dtype=np.float64)
        vb, vw = v[:p], v[p:]
        u = x @ vb + vw
        top = inv_d2 * (x.T @ u) + prior_prec @ vb
        bottom = inv_d2 * u + precision_matvec(f, vw)
        return np.concatenate([top, bottom])

    op = LinearOperator(n + p, matvec, normal)
    rhs = spmv_t(design, response)
    return StackedSystem(op, normal, rhs, design, response, n, p, float(delta2), x, f)


def _method_rhs(sys: StackedSystem, u, rhs) -> np.ndarray:
    return sys.rhs_from_rows(u) if rhs is None else rhs


def solve_normal(sys: StackedSystem, method: str, u=None, rhs=None,
                 cfg: SolverConfig | None = None) -> tuple[np.ndarray, SolveReport]:
    """Solve ``X*^T X* v = X*^T u`` with the named strategy.

    ``u`` is a row-space vector (length ``sys.n_rows``); defaults to ``y*``.
    ``rhs`` may be passed instead when ``X*^T u`` is already known (all methods
    except ``cgls`` need only the rhs). The report's wall time covers any
    preconditioner build or factorization.
    """
    method = canonical_method(method)
    cfg = cfg or SolverConfig(tol=DEFAULT_TOL)
    if u is None and rhs is None:
        u, rhs = sys.stacked_response, sys.rhs
    a = sys.normal_matrix
    t0 = time.perf_counter()
    if method == "cgls":
        if u is None:
            raise ValueError("cgls needs the row-space vector u, not just the right-hand side")
        x, rep = cgls_solve(sys.stacked_design, u, cfg)
    else:
        b = _method_rhs(sys, u, rhs)
        if method == "cgsparse":
            x, rep = cg_solve(a, b, cfg=cfg)
        elif method == "identity-pcg":
            x, rep = pcg_solve(a, identity_build(a.n_rows), b, cfg, method=method)
        elif method == "jacobi-pcg":
            x, rep = pcg_solve(a, jacobi_build(a), b, cfg, method=method)
        elif method == "ic0-pcg":
            x, rep = pcg_solve(a, ic0_build(a, shift_on_breakdown=True), b, cfg, method=method)
        elif method == "symbolic-cholesky":
            x, rep = symbolic_cholesky_solve(a, b, perm=direct_ordering(sys))
        else:  # dense
            dense = sys.dense_normal()
            t0 = time.perf_counter()
            x = dense_solve(dense, b)
            rep = SolveReport("dense", 0, float("nan"), True, 0.0)
    rep.wall_time = time.perf_counter() - t0
    rep.method = method
    return x, rep


def direct_ordering(sys: StackedSystem) -> np.ndarray:
    """Unknown order for the sparse direct solve: latent block first, then beta.

    The beta rows couple to every latent unknown; eliminating them first
    would fill the whole factor.
    """
    return np.concatenate([np.arange(sys.p, sys.dim), np.arange(sys.p)])


@dataclass
class PosteriorSummary:
    mu_star: np.ndarray
    a_star: float
    b_star: float
    p: int
    solve_reports: list[SolveReport] = field(default_factory=list)
    order: np.ndarray | None = None

    @property
    def beta(self) -> np.ndarray:
        return self.mu_star[: self.p]

    @property
    def w(self) -> np.ndarray:
        return self.mu_star[self.p:]


@dataclass
class PosteriorDraw:
    sigma2: float
    gamma: np.ndarray
    p: int
    delta2: float
    report: SolveReport | None = None

    @property
    def beta(self) -> np.ndarray:
        return self.gamma[: self.p]

    @property
    def w(self) -> np.ndarray:
        return self.gamma[self.p:]

    @property
    def tau2(self) -> float:
        return self.delta2 * self.sigma2


def posterior_mean(sys: StackedSystem, method: str = "cgsparse",
                   cfg: SolverConfig | None = None) -> tuple[np.ndarray, SolveReport]:
    return solve_normal(sys, method, cfg=cfg)


def ab_star(sys: StackedSystem, prior: NigPrior, mu_star) -> tuple[float, float]:
    """Inverse-gamma posterior parameters.

    ``b* = b + (|y*|^2 - mu*^T X*^T y*) / 2``; the prior quadratic
    ``mu^T V^{-1} mu`` is part of ``|y*|^2`` through the prior rows.
    """
    mu_star = np.asarray(mu_star, dtype=np.float64)
    a_star = prior.a + sys.n / 2.0
    quad = float(sys.stacked_response @ sys.stacked_response) - float(mu_star @ sys.rhs)
    b_star = prior.b + 0.5 * quad
    if not b_star > 0:
        raise PosteriorError(f"b* = {b_star:.6g} is not positive; the posterior mean is probably unconverged")
    return a_star, b_star


def sample_sigma2(a_star: float, b_star: float, rng: RngState) -> float:
    return inverse_gamma_variate(rng, a_star, b_star)


def sample_gamma(sys: StackedSystem, mu_star, sigma2: float, method: str, rng: RngState,
                 cfg: SolverConfig | None = None) -> PosteriorDraw:
    """gamma = mu* + v with X*^T X* v = X*^T eta, eta ~ N(0, sigma2 I) over the stacked rows."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    eta = np.sqrt(sigma2) * rng.normals(sys.n_rows)
    v, rep = solve_normal(sys, method, u=eta, cfg=cfg)
    return PosteriorDraw(sigma2, np.asarray(mu_star) + v, sys.p, sys.delta2, rep)


def fit(x, y, locations, m: int, kernel: CovarianceKernel, delta2: float, prior: NigPrior | None = None,
        method: str = "cgsparse", n_draws: int = 0, rng: RngState | None = None,
        cfg: SolverConfig | None = None, search: str = "auto") -> tuple[PosteriorSummary, list[PosteriorDraw]]:
    """End-to-end: NNGP factors, stacked system, mu*, (a*, b*) and ``n_draws`` joint draws.

    Inputs and outputs are in the caller's row order; the latent block of
    ``mu_star`` and of every draw is mapped back from the NNGP ordering.
    Draw ``k`` uses the substream ``rng.spawn(k)``.
    """
    if n_draws < 0:
        raise ValueError("n_draws must be non-negative")
    prior = prior or NigPrior()
    method = canonical_method(method)
    rng = rng or RngState(0)
    y = np.asarray(y, dtype=np.float64).ravel()
    x = np.zeros((y.shape[0], 0)) if x is None else np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    f = nngp_mod.nngp(kernel, locations, m, search=search)
    order = f.order
    sys = assemble_stacked(x[order], y[order], f, delta2, prior)
    mu, rep = posterior_mean(sys, method, cfg)
    a_star, b_star = ab_star(sys, prior, mu)
    p = sys.p

    def to_caller(g):
        out = g.copy()
        out[p + order] = g[p:]
        return out

    summary = PosteriorSummary(to_caller(mu), a_star, b_star, p, [rep], order)
    draws = []
    for k in range(n_draws):
        sub = rng.spawn(k)
        s2 = sample_sigma2(a_star, b_star, sub)
        d = sample_gamma(sys, mu, s2, method, sub, cfg)
        d.gamma = to_caller(d.gamma)
        summary.solve_reports.append(d.report)
        draws.append(d)
    return summary, draws
