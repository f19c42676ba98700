"""Sample-quality measures for particle clouds."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial.distance import cdist, pdist

__all__ = [
    "MetricsReport",
    "compute_report",
    "kde_1d",
    "ks_statistic_1d",
    "median_bandwidth",
    "mmd_squared",
    "mode_occupancy",
    "sample_moments",
    "silverman_bandwidth",
]


def _samples_2d(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"samples must be an (n, d) array, got shape {x.shape}")
    return x


def sample_moments(samples) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector and unbiased (divisor n - 1) covariance matrix."""
    x = _samples_2d(samples)
    n = x.shape[0]
    if n < 2:
        raise ValueError(f"need at least 2 samples, got {n}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    return mean, (cov + cov.T) / 2.0


def ks_statistic_1d(samples: Sequence[float], cdf: Callable) -> float:
    """One-sample Kolmogorov-Smirnov distance ``sup |F_n - F|``."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise ValueError("ks_statistic_1d needs at least one sample")
    f = np.asarray(cdf(x), dtype=np.float64).reshape(n)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def median_bandwidth(x: np.ndarray, y: np.ndarray) -> float:
    """Median pairwise Euclidean distance over the pooled sample."""
    h = float(np.median(pdist(np.concatenate([x, y], axis=0))))
    if h <= 0:
        raise ValueError("zero bandwidth: median pairwise distance is 0")
    return h


def mmd_squared(X, Y, bandwidth: float | str = "median") -> float:
    """Unbiased MMD^2 U-statistic with kernel ``exp(-|a - b|^2 / (2 h^2))``.

    Can be slightly negative.
    """
    x, y = _samples_2d(X), _samples_2d(Y)
    n, m = x.shape[0], y.shape[0]
    if n < 2 or m < 2:
        raise ValueError("mmd_squared needs at least 2 samples in each set")
    if x.shape[1] != y.shape[1]:
        raise ValueError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if bandwidth == "median":
        h = median_bandwidth(x, y)
    elif isinstance(bandwidth, str):
        raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ValueError(f"bandwidth must be positive, got {h}")

    def gram(a, b):
        return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * h * h))

    kxx, kyy, kxy = gram(x, x), gram(y, y), gram(x, y)
    np.fill_diagonal(kxx, 0.0)
    np.fill_diagonal(kyy, 0.0)
    return float(kxx.sum() / (n * (n - 1)) + kyy.sum() / (m * (m - 1)) - 2.0 * kxy.mean())


def mode_occupancy(samples, centers, radius: float) -> list[float]:
    """Fraction of samples assigned to each center.

    A sample counts for its nearest center (first one on ties) and only if
    it lies within ``radius`` of it.
    """
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    x = _samples_2d(samples)
    c = np.asarray(centers, dtype=np.float64)
    if c.ndim == 1:
        c = c[:, None] if x.shape[1] == 1 else c[None, :]
    if c.shape[0] == 0:
        raise ValueError("need at least one center")
    dist = np.sqrt(np.sum((x[:, None, :] - c[None, :, :]) ** 2, axis=-1))
    nearest = np.argmin(dist, axis=1)
    inside = dist[np.arange(x.shape[0]), nearest] <= radius
    counts = np.bincount(nearest[inside], minlength=c.shape[0])
    return (counts / x.shape[0]).tolist()


def silverman_bandwidth(samples) -> float:
    """Rule of thumb ``1.06 * sd * n^(-1/5)`` with the n - 1 standard deviation."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    sd = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    if sd == 0:
        raise ValueError("silverman bandwidth undefined for zero sample variance")
    return 1.06 * sd * x.size ** (-0.2)


def kde_1d(samples, grid, bandwidth: float | str = "silverman") -> np.ndarray:
    """Gaussian kernel density estimate evaluated on ``grid``."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("kde_1d needs at least one sample")
    if bandwidth == "silverman":
        h = silverman_bandwidth(x)
    elif isinstance(bandwidth, str):
        raise ValueError(f"unknown bandwidth rule {bandwidth!r}")
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ValueError(f"bandwidth must be positive, got {h}")
    g = np.asarray(grid, dtype=np.float64).ravel()
    z = (g[:, None] - x[None, :]) / h
    return np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * math.sqrt(2.0 * math.pi))


@dataclass
class MetricsReport:
    mean: list[float]
    covariance: list[list[float]]
    ks_per_dim: list[float] | None = None
    mmd_squared: float | None = None
    mode_occupancy: list[float] | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def compute_report(
    samples,
    *,
    marginal_cdfs: Sequence[Callable | None] | None = None,
    reference=None,
    mmd_bandwidth: float | str = "median",
    mode_centers=None,
    mode_radius: float | None = None,
) -> MetricsReport:
    """Collect whatever metrics the supplied references allow."""
    x = _samples_2d(samples)
    mean, cov = sample_moments(x)
    report = MetricsReport(mean.tolist(), cov.tolist())
    if marginal_cdfs is not None and all(f is not None for f in marginal_cdfs):
        report.ks_per_dim = [ks_statistic_1d(x[:, i], f) for i, f in enumerate(marginal_cdfs)]
    if reference is not None:
        report.mmd_squared = mmd_squared(x, reference, mmd_bandwidth)
    if mode_centers is not None:
        if mode_radius is None:
            raise ValueError("mode_radius is required with mode_centers")
        report.mode_occupancy = mode_occupancy(x, mode_centers, mode_radius)
    return report
