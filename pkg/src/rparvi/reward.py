"""Composite reward: weighted density plus pointwise entropy ``-p ln p``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["RewardWeights", "ENTROPY_FLOOR", "entropy_term", "reward"]

# Values at or below this are treated as zero density (0 ln 0 := 0).
ENTROPY_FLOOR = 1e-300


@dataclass(frozen=True)
class RewardWeights:
    alpha: float = 0.6
    beta: float = 0.4

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise ValueError(f"weights must lie in [0, 1], got alpha={self.alpha}, beta={self.beta}")
        if abs(self.alpha + self.beta - 1.0) > 1e-12:
            raise ValueError(f"alpha + beta must equal 1, got {self.alpha + self.beta}")

    @classmethod
    def from_alpha(cls, alpha: float) -> "RewardWeights":
        return cls(alpha, 1.0 - alpha)


def _check_density(p: np.ndarray) -> None:
    if not np.all(np.isfinite(p)):
        raise ValueError("density values must be finite")
    if np.any(p < 0):
        raise ValueError("density values must be nonnegative")


def _entropy(p: np.ndarray) -> np.ndarray:
    safe = np.where(p > ENTROPY_FLOOR, p, 1.0)
    return np.where(p > ENTROPY_FLOOR, -safe * np.log(safe), 0.0)


def entropy_term(p):
    """``-p ln p`` with ``0`` returned for ``p <= 1e-300``. Accepts scalars or arrays."""
    arr = np.asarray(p, dtype=np.float64)
    _check_density(arr)
    out = _entropy(arr)
    return float(out) if out.ndim == 0 else out


def reward(p, w: RewardWeights):
    """``alpha * p + beta * (-p ln p)``.

    Negative for large enough ``p > 1``; no attempt is made to rescale.
    """
    arr = np.asarray(p, dtype=np.float64)
    _check_density(arr)
    out = w.alpha * arr + w.beta * _entropy(arr)
    return float(out) if out.ndim == 0 else out
