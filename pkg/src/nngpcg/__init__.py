"""Conjugate-gradient accelerated conjugate Bayesian inference for NNGP spatial regression."""

from ._backend import BACKEND
from .kernels import CovarianceKernel, cov, cov_matrix, sinusoidal_project
from .nngp import NeighborSets, NngpFactors, build_neighbor_sets, build_nngp_factors, build_order
from .posterior import METHODS, NigPrior, StackedSystem, assemble_stacked, fit
from .rng import RngState
from .sparse_core import SparseMatrix, from_triplets, spmv, transpose

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "METHODS",
    "CovarianceKernel",
    "NeighborSets",
    "NigPrior",
    "NngpFactors",
    "RngState",
    "SparseMatrix",
    "StackedSystem",
    "assemble_stacked",
    "build_neighbor_sets",
    "build_nngp_factors",
    "build_order",
    "cov",
    "cov_matrix",
    "fit",
    "from_triplets",
    "sinusoidal_project",
    "spmv",
    "transpose",
]
