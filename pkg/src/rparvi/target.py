"""Unnormalized target densities.

All built-in kernels are peak-normalized (value 1 at the mode) rather than
probability-normalized, so a single component never exceeds its weight.
Densities are evaluated in linear space; far tails underflow to 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, Mapping, Sequence

import numpy as np
from scipy.special import ndtr

from rparvi.core import ValidationError

__all__ = [
    "BananaTarget",
    "CallableTarget",
    "GaussianTarget",
    "MixtureComponent",
    "MixtureSpec",
    "MixtureTarget",
    "RingTarget",
    "ScaledTarget",
    "TargetDensity",
    "density_banana",
    "density_gaussian_iso",
    "density_mixture",
    "density_ring",
    "target_from_descriptor",
]


def _as_points(x, dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if dim is not None and x.shape[-1] != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {x.shape[-1]}")
    return x


def _scalar_or_array(values: np.ndarray):
    return float(values) if values.ndim == 0 else values


def density_gaussian_iso(x, mean, std: float):
    """``exp(-|x - mean|^2 / (2 std^2))``; the last axis of ``x`` is the dimension."""
    mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
    if not std > 0:
        raise ValueError(f"std must be positive, got {std}")
    x = _as_points(x, mean.shape[0])
    sq = np.sum((x - mean) ** 2, axis=-1)
    return _scalar_or_array(np.exp(-sq / (2.0 * std * std)))


@dataclass(frozen=True)
class MixtureComponent:
    weight: float
    mean: tuple[float, ...]
    std: float


@dataclass(frozen=True)
class MixtureSpec:
    """Weighted isotropic Gaussian kernels. Weights need not sum to one."""

    components: tuple[MixtureComponent, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError("mixture needs at least one component")
        dims = {len(c.mean) for c in self.components}
        if len(dims) != 1:
            raise ValueError(f"mixture component means disagree in dimension: {sorted(dims)}")
        for c in self.components:
            if not c.std > 0:
                raise ValueError(f"mixture std must be positive, got {c.std}")
            if not c.weight > 0:
                raise ValueError(f"mixture weight must be positive, got {c.weight}")

    @classmethod
    def from_lists(cls, weights: Sequence[float], means: Sequence[Sequence[float]], stds: Sequence[float]):
        if not len(weights) == len(means) == len(stds):
            raise ValueError("weights, means and stds must have equal length")
        comps = tuple(
            MixtureComponent(float(w), tuple(float(v) for v in np.atleast_1d(m)), float(s))
            for w, m, s in zip(weights, means, stds)
        )
        return cls(comps)

    @property
    def dim(self) -> int:
        return len(self.components[0].mean)


def density_mixture(x, spec: MixtureSpec):
    """``sum_k w_k exp(-|x - mu_k|^2 / (2 sigma_k^2))``."""
    x = _as_points(x, spec.dim)
    total = np.zeros(x.shape[:-1])
    for c in spec.components:
        total = total + c.weight * density_gaussian_iso(x, c.mean, c.std)
    return _scalar_or_array(np.asarray(total))


def density_banana(x, curvature: float, scale: float):
    """Curved 2-d Gaussian bent along ``x2 = b (x1^2 - scale^2)``."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    x = _as_points(x)
    if x.shape[-1] != 2:
        raise ValueError(f"banana density is 2-dimensional, got dimension {x.shape[-1]}")
    x1, x2 = x[..., 0], x[..., 1]
    ridge = x2 - curvature * (x1 * x1 - scale * scale)
    return _scalar_or_array(np.exp(-x1 * x1 / (2.0 * scale * scale) - ridge * ridge / 2.0))


def density_ring(x, radius: float, width: float):
    """``exp(-(|x| - r0)^2 / (2 w^2))`` in two dimensions."""
    if not radius > 0 or not width > 0:
        raise ValueError("ring radius and width must be positive")
    x = _as_points(x)
    if x.shape[-1] != 2:
        raise ValueError(f"ring density is 2-dimensional, got dimension {x.shape[-1]}")
    r = np.hypot(x[..., 0], x[..., 1])
    return _scalar_or_array(np.exp(-((r - radius) ** 2) / (2.0 * width * width)))


# ---------------------------------------------------------------------------
# Target objects
# ---------------------------------------------------------------------------


class TargetDensity:
    """Evaluation contract for an unnormalized density over R^dim.

    Subclasses implement :meth:`evaluate`, which maps an ``(n, dim)`` array
    to ``n`` nonnegative values. It must be pure and safe to call from
    several threads at once.
    """

    kind = "custom"
    dim: int

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __call__(self, x) -> float:
        x = _as_points(x, self.dim)
        if x.ndim != 1:
            raise ValueError("__call__ takes a single point; use evaluate() for batches")
        return float(self.evaluate(x[None, :])[0])

    def descriptor(self) -> dict[str, Any]:
        return {"kind": self.kind}

    def marginal_cdf(self, axis: int) -> Callable[[np.ndarray], np.ndarray] | None:
        """CDF of the normalized marginal along ``axis``, when known in closed form."""
        return None


class GaussianTarget(TargetDensity):
    kind = "gaussian"

    def __init__(self, mean, std: float = 1.0):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=np.float64))
        if not std > 0:
            raise ValueError(f"std must be positive, got {std}")
        self.std = float(std)
        self.dim = self.mean.shape[0]

    def evaluate(self, points):
        return np.atleast_1d(density_gaussian_iso(points, self.mean, self.std))

    def descriptor(self):
        return {"kind": self.kind, "mean": self.mean.tolist(), "std": self.std}

    def marginal_cdf(self, axis):
        mu, s = self.mean[axis], self.std
        return lambda t: ndtr((np.asarray(t, dtype=np.float64) - mu) / s)


class MixtureTarget(TargetDensity):
    kind = "mixture"

    def __init__(self, spec: MixtureSpec):
        self.spec = spec
        self.dim = spec.dim

    def evaluate(self, points):
        return np.atleast_1d(density_mixture(points, self.spec))

    def descriptor(self):
        return {
            "kind": self.kind,
            "components": [
                {"weight": c.weight, "mean": list(c.mean), "std": c.std} for c in self.spec.components
            ],
        }

    def marginal_cdf(self, axis):
        comps = self.spec.components
        # peak-normalized kernels: component mass is proportional to weight * std^dim
        mass = [c.weight * c.std**self.dim for c in comps]
        total = sum(mass)

        def cdf(t):
            t = np.asarray(t, dtype=np.float64)
            return sum(m * ndtr((t - c.mean[axis]) / c.std) for m, c in zip(mass, comps)) / total

        return cdf


class BananaTarget(TargetDensity):
    kind = "banana"
    dim = 2

    def __init__(self, curvature: float = 0.3, scale: float = 2.0):
        if not scale > 0:
            raise ValueError(f"scale must be positive, got {scale}")
        self.curvature = float(curvature)
        self.scale = float(scale)

    def evaluate(self, points):
        return np.atleast_1d(density_banana(points, self.curvature, self.scale))

    def descriptor(self):
        return {"kind": self.kind, "curvature": self.curvature, "scale": self.scale}

    def marginal_cdf(self, axis):
        if axis != 0:
            return None
        s = self.scale
        return lambda t: ndtr(np.asarray(t, dtype=np.float64) / s)


class RingTarget(TargetDensity):
    kind = "ring"
    dim = 2

    def __init__(self, radius: float = 2.0, width: float = 0.5):
        if not radius > 0 or not width > 0:
            raise ValueError("ring radius and width must be positive")
        self.radius = float(radius)
        self.width = float(width)

    def evaluate(self, points):
        return np.atleast_1d(density_ring(points, self.radius, self.width))

    def descriptor(self):
        return {"kind": self.kind, "radius": self.radius, "width": self.width}


class ScaledTarget(TargetDensity):
    """``factor`` times another target; same normalized distribution."""

    def __init__(self, base: TargetDensity, factor: float):
        if not factor > 0:
            raise ValueError(f"factor must be positive, got {factor}")
        self.base = base
        self.factor = float(factor)
        self.dim = base.dim
        self.kind = base.kind

    def evaluate(self, points):
        return self.factor * self.base.evaluate(points)

    def descriptor(self):
        return {**self.base.descriptor(), "scale_factor": self.factor}

    def marginal_cdf(self, axis):
        return self.base.marginal_cdf(axis)


class CallableTarget(TargetDensity):
    """Wrap a plain function of one d-vector (or of a batch, if ``vectorized``)."""

    def __init__(self, fn: Callable, dim: int, vectorized: bool = False, name: str = "custom"):
        self.fn = fn
        self.dim = int(dim)
        self.vectorized = vectorized
        self.kind = name

    def evaluate(self, points):
        points = np.asarray(points, dtype=np.float64)
        if self.vectorized:
            return np.asarray(self.fn(points), dtype=np.float64).reshape(points.shape[0])
        return np.array([float(self.fn(p)) for p in points], dtype=np.float64)


# ---------------------------------------------------------------------------
# Descriptors
# ---------------------------------------------------------------------------

_PARAMS = {
    "gaussian": {"mean", "std"},
    "mixture": {"components"},
    "banana": {"curvature", "scale"},
    "ring": {"radius", "width"},
}


def _real(path: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValidationError(path, f"{path}: expected a finite number, got {value!r}")
    return float(value)


def _vector(path: str, value: Any) -> list[float]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [value]
    if not isinstance(value, (list, tuple)) or not value:
        raise ValidationError(path, f"{path}: expected a list of numbers, got {value!r}")
    return [_real(f"{path}[{i}]", v) for i, v in enumerate(value)]


def target_from_descriptor(desc: str | Mapping[str, Any], dim: int | None = None) -> TargetDensity:
    """Build a built-in target from ``{"kind": ..., **params}`` or a bare kind name.

    ``dim`` fills in a default Gaussian mean and is checked against the
    target's own dimension when given.
    """
    if isinstance(desc, str):
        desc = {"kind": desc}
    if not isinstance(desc, Mapping):
        raise ValidationError("target", "target must be a kind name or a mapping")
    if "kind" not in desc:
        raise ValidationError("target.kind", "missing required key: target.kind")
    kind = desc["kind"]
    if kind not in _PARAMS:
        raise ValidationError("target.kind", f"unknown target kind: {kind!r} (expected one of {sorted(_PARAMS)})")
    for key in desc:
        if key != "kind" and key not in _PARAMS[kind]:
            raise ValidationError(f"target.{key}", f"unknown key: {key}")

    try:
        if kind == "gaussian":
            if "mean" in desc:
                mean = _vector("target.mean", desc["mean"])
            elif dim is not None:
                mean = [0.0] * dim
            else:
                raise ValidationError("target.mean", "gaussian target needs a mean or a known dimension")
            target = GaussianTarget(mean, _real("target.std", desc.get("std", 1.0)))
        elif kind == "mixture":
            comps = desc.get("components")
            if not isinstance(comps, list) or not comps:
                raise ValidationError("target.components", "mixture needs a nonempty list of components")
            parsed = []
            for i, c in enumerate(comps):
                path = f"target.components[{i}]"
                if not isinstance(c, Mapping):
                    raise ValidationError(path, f"{path}: expected a mapping")
                extra = set(c) - {"weight", "mean", "std"}
                if extra:
                    raise ValidationError(f"{path}.{min(extra)}", f"unknown key: {min(extra)}")
                for key in ("mean", "std"):
                    if key not in c:
                        raise ValidationError(f"{path}.{key}", f"missing required key: {path}.{key}")
                parsed.append(
                    MixtureComponent(
                        _real(f"{path}.weight", c.get("weight", 1.0)),
                        tuple(_vector(f"{path}.mean", c["mean"])),
                        _real(f"{path}.std", c["std"]),
                    )
                )
            target = MixtureTarget(MixtureSpec(tuple(parsed)))
        elif kind == "banana":
            target = BananaTarget(
                _real("target.curvature", desc.get("curvature", 0.3)),
                _real("target.scale", desc.get("scale", 2.0)),
            )
        else:
            target = RingTarget(
                _real("target.radius", desc.get("radius", 2.0)),
                _real("target.width", desc.get("width", 0.5)),
            )
    except ValidationError:
        raise
    except ValueError as exc:
        raise ValidationError("target", f"target: {exc}") from exc

    if dim is not None and target.dim != dim:
        raise ValidationError("target", f"target dimension {target.dim} does not match dim={dim}")
    return target
