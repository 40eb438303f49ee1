"""Covariance kernels and coordinate projection."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_KM = 6371.0


class KernelFamily(enum.Enum):
    EXPONENTIAL = "exponential"


@dataclass(frozen=True)
class CovarianceKernel:
    """Stationary isotropic covariance ``sigma2 * exp(-phi * |s1 - s2|)``.

    ``phi`` is a decay rate in inverse coordinate units (1/1000 km for
    projected data).
    """

    sigma2: float = 1.0
    phi: float = 7.0
    family: KernelFamily = KernelFamily.EXPONENTIAL

    def __post_init__(self):
        if not (self.sigma2 > 0 and math.isfinite(self.sigma2)):
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if not (self.phi > 0 and math.isfinite(self.phi)):
            raise ValueError(f"phi must be positive, got {self.phi}")

    def of_distance(self, d):
        return self.sigma2 * np.exp(-self.phi * np.asarray(d, dtype=np.float64))


def sinusoidal_project(lon_deg, lat_deg):
    """Sinusoidal projection of degrees to planar coordinates in units of 1000 km.

    Accepts scalars or arrays; returns an array of shape ``(..., 2)``.
    """
    lon = np.asarray(lon_deg, dtype=np.float64)
    lat = np.asarray(lat_deg, dtype=np.float64)
    if not (np.all(np.isfinite(lon)) and np.all(np.isfinite(lat))):
        raise ValueError("non-finite longitude/latitude")
    if np.any(np.abs(lon) > 180) or np.any(np.abs(lat) > 90):
        raise ValueError("longitude must lie in [-180, 180] and latitude in [-90, 90]")
    lon_r, lat_r = np.radians(lon), np.radians(lat)
    x = EARTH_RADIUS_KM * lon_r * np.cos(lat_r) / 1000.0
    y = EARTH_RADIUS_KM * lat_r / 1000.0
    return np.stack([x, y], axis=-1)


def as_locations(locations) -> np.ndarray:
    s = np.asarray(locations, dtype=np.float64)
    if s.ndim == 1:
        s = s[:, None]
    if s.ndim != 2 or s.shape[1] < 1:
        raise ValueError(f"locations must be an (n, d) array, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise ValueError("locations contain non-finite coordinates")
    return np.ascontiguousarray(s)


def cov(kernel: CovarianceKernel, s1, s2) -> float:
    a = np.asarray(s1, dtype=np.float64)
    b = np.asarray(s2, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("locations have different dimensions")
    return float(kernel.of_distance(np.sqrt(np.sum((a - b) ** 2))))


def cov_matrix(kernel: CovarianceKernel, s1, s2=None) -> np.ndarray:
    """Dense cross-covariance between two location sets (``s2`` defaults to ``s1``)."""
    a = as_locations(s1)
    b = a if s2 is None else as_locations(s2)
    if a.shape[1] != b.shape[1]:
        raise ValueError("location sets have different dimensions")
    diff = a[:, None, :] - b[None, :, :]
    return kernel.of_distance(np.sqrt(np.sum(diff * diff, axis=-1)))
