"""CSV ingestion and synthetic spatial datasets."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .kernels import CovarianceKernel, sinusoidal_project
from .nngp import nngp, simulate_latent
from .rng import RngState, gamma_variate, standard_normal

__all__ = [
    "DataError",
    "SpatialDataset",
    "RngState",
    "gamma_variate",
    "read_csv",
    "simulate_dataset",
    "standard_normal",
    "write_csv",
]


class DataError(ValueError):
    pass


@dataclass
class SpatialDataset:
    locations: np.ndarray
    x: np.ndarray
    y: np.ndarray
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.y.shape[0]
        if self.locations.shape[0] != n or self.x.shape[0] != n:
            raise DataError("locations, covariates and response disagree on n")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


def _parse(value: str, line: int, column: str) -> float:
    txt = value.strip()
    if txt == "" or txt.upper() in {"NA", "NAN", "NULL"}:
        raise DataError(f"line {line}: missing value in column {column!r}")
    try:
        out = float(txt)
    except ValueError:
        raise DataError(f"line {line}: cannot parse {value!r} in column {column!r} as a number") from None
    if not math.isfinite(out):
        raise DataError(f"line {line}: non-finite value in column {column!r}")
    return out


def read_csv(path, y_col: str, x_cols: list[str] | None = None, lon_col: str | None = None,
             lat_col: str | None = None, coord_cols: list[str] | None = None,
             intercept: bool = True) -> SpatialDataset:
    """Read a headed CSV.

    Coordinates come either from ``lon_col``/``lat_col`` (degrees, projected
    sinusoidally to 1000 km units) or from planar ``coord_cols``. The design
    matrix is ``[1, x_cols...]`` unless ``intercept`` is false.
    """
    x_cols = list(x_cols or [])
    if (lon_col is None) != (lat_col is None):
        raise DataError("lon_col and lat_col must be given together")
    if lon_col is None and not coord_cols:
        raise DataError("need lon_col/lat_col or coord_cols")
    loc_cols = [lon_col, lat_col] if lon_col is not None else list(coord_cols)
    wanted = loc_cols + [y_col] + x_cols
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        missing = [c for c in wanted if c not in header]
        if missing:
            raise DataError(f"{path}: missing columns {missing}; header has {header}")
        pos = {c: header.index(c) for c in wanted}
        rows = []
        for line_no, rec in enumerate(reader, start=2):
            if not rec or all(not v.strip() for v in rec):
                continue
            if len(rec) != len(header):
                raise DataError(f"line {line_no}: expected {len(header)} fields, got {len(rec)}")
            rows.append([_parse(rec[pos[c]], line_no, c) for c in wanted])
    if not rows:
        raise DataError(f"{path}: no data rows")
    arr = np.array(rows, dtype=np.float64)
    k = len(loc_cols)
    if lon_col is not None:
        try:
            locs = sinusoidal_project(arr[:, 0], arr[:, 1])
        except ValueError as exc:
            raise DataError(str(exc)) from None
    else:
        locs = arr[:, :k].copy()
    y = arr[:, k].copy()
    cov = arr[:, k + 1:]
    x = np.column_stack([np.ones(len(y)), cov]) if intercept else cov.copy()
    names = {"locations": loc_cols, "y": y_col, "x": (["(intercept)"] if intercept else []) + x_cols}
    return SpatialDataset(locs, x, y, names)


def write_csv(ds: SpatialDataset, path, coord_names=("coord_x", "coord_y"), y_name="y",
              x_names: list[str] | None = None, skip_intercept: bool = True) -> list[str]:
    """Write a dataset as CSV with full-precision ``repr`` floats; returns the header."""
    d = ds.locations.shape[1]
    coord_names = list(coord_names)[:d] if d <= len(coord_names) else [f"coord_{i}" for i in range(d)]
    x = ds.x
    if skip_intercept and x.shape[1] and np.all(x[:, 0] == 1.0):
        x = x[:, 1:]
    if x_names is None:
        x_names = [f"x{i + 1}" for i in range(x.shape[1])]
    header = coord_names + [y_name] + list(x_names)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(ds.n):
            w.writerow([repr(float(v)) for v in (*ds.locations[i], ds.y[i], *x[i])])
    return header


def simulate_dataset(n: int, p: int, kernel: CovarianceKernel, beta, delta2: float, m: int,
                     rng: RngState) -> tuple[SpatialDataset, dict]:
    """Uniform locations on the unit square, ``X = [1, N(0,1)...]`` and ``y = X beta + w + eps``.

    ``w`` is an NNGP draw (``m`` neighbors) and ``eps ~ N(0, delta2 * sigma2)``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if p < 1:
        raise ValueError("p must be at least 1 (the intercept)")
    if not delta2 > 0:
        raise ValueError("delta2 must be positive")
    beta = np.asarray(beta, dtype=np.float64).ravel()
    if beta.shape != (p,):
        raise ValueError(f"beta must have length {p}")
    seed, start = rng.seed, rng.counter
    locs = rng.uniform(2 * n).reshape(n, 2)
    x = np.ones((n, p))
    if p > 1:
        x[:, 1:] = rng.normals(n * (p - 1)).reshape(n, p - 1)
    f = nngp(kernel, locs, m)
    w = np.empty(n)
    w[f.order] = simulate_latent(f, rng)
    eps = np.sqrt(delta2 * kernel.sigma2) * rng.normals(n)
    y = x @ beta + w + eps
    ds = SpatialDataset(locs, x, y, {"locations": ["coord_x", "coord_y"], "y": "y",
                                     "x": ["(intercept)"] + [f"x{i}" for i in range(1, p)]})
    truth = {"beta": beta, "w": w, "eps": eps, "seed": seed, "counter": start, "n": n, "p": p,
             "sigma2": kernel.sigma2, "phi": kernel.phi, "delta2": delta2, "m": m}
    return ds, truth
