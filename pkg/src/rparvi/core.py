"""Hyperparameters, particle state, clipping and keyed random streams.

Every random variate used by the sampler is a pure function of
``(root_seed, purpose, particle_index, iteration, draw_counter)``. The words
come from a Philox4x64-10 block keyed by ``(root_seed, purpose)`` with the
counter ``(block, iteration, particle_index, 0)``, so any subset of particles
can be advanced in any order, on any number of workers, and produce the same
bits.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from rparvi._philox import philox4x64

__all__ = [
    "DEFAULTS",
    "Hyperparameters",
    "ParticleSystem",
    "RandomStream",
    "RewardHistory",
    "StreamPurpose",
    "ValidationError",
    "clip_position",
    "init_particles",
    "keyed_normals",
    "keyed_uniforms",
    "keyed_words",
    "validate_hyperparameters",
]

U64_MAX = 2**64 - 1

# Example values from the method description.
DEFAULTS: dict[str, Any] = {
    "alpha": 0.6,
    "eta": 0.1,
    "epsilon": 0.1,
    "gamma": 0.9,
    "perturb_std": 0.1,
    "seed": 0,
    "record_trajectory": False,
    "cheap_history": False,
}

REQUIRED = ("num_particles", "dim", "num_iterations", "bound")

ALIASES = {
    "M": "num_particles",
    "d": "dim",
    "T": "num_iterations",
    "L": "bound",
    "sigma_delta": "perturb_std",
}


class ValidationError(ValueError):
    """Invalid configuration value. ``key`` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key


class StreamPurpose(enum.IntEnum):
    """Second key word; keeps the streams of different consumers disjoint."""

    INIT = 1
    STEP = 2
    MH_INIT = 3
    MH_STEP = 4


def _is_int(value: Any) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, (bool, np.bool_))


def _is_real(value: Any) -> bool:
    return (_is_int(value) or isinstance(value, (float, np.floating))) and not isinstance(
        value, (bool, np.bool_)
    )


def _check_int(key: str, value: Any, minimum: int) -> int:
    if not _is_int(value):
        raise ValidationError(key, f"{key} must be an integer, got {value!r}")
    if value < minimum:
        kind = "positive" if minimum == 1 else f">= {minimum}"
        raise ValidationError(key, f"{key} must be {kind}, got {value}")
    return int(value)


def _check_real(key: str, value: Any, lo: float, hi: float, lo_open: bool, hi_open: bool) -> float:
    if not _is_real(value):
        raise ValidationError(key, f"{key} must be a real number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ValidationError(key, f"{key} must be finite, got {value}")
    too_low = value <= lo if lo_open else value < lo
    too_high = value >= hi if hi_open else value > hi
    if too_low or too_high:
        if lo == 0 and lo_open and hi == math.inf:
            raise ValidationError(key, f"{key} must be positive, got {value}")
        if lo == 0 and hi == math.inf:
            raise ValidationError(key, f"{key} must be nonnegative, got {value}")
        left = "(" if lo_open else "["
        right = ")" if hi_open else "]"
        raise ValidationError(key, f"{key} must lie in {left}{lo}, {hi}{right}, got {value}")
    return value


@dataclass(frozen=True)
class Hyperparameters:
    """Run constants for one sampler run.

    ``beta`` is not an argument: it is always ``1 - alpha``.
    """

    num_particles: int
    dim: int
    num_iterations: int
    bound: float
    alpha: float = DEFAULTS["alpha"]
    eta: float = DEFAULTS["eta"]
    epsilon: float = DEFAULTS["epsilon"]
    gamma: float = DEFAULTS["gamma"]
    perturb_std: float = DEFAULTS["perturb_std"]
    seed: int = DEFAULTS["seed"]
    record_trajectory: bool = DEFAULTS["record_trajectory"]
    cheap_history: bool = DEFAULTS["cheap_history"]
    beta: float = field(init=False)

    def __post_init__(self):
        set_ = lambda name, value: object.__setattr__(self, name, value)  # noqa: E731
        set_("num_particles", _check_int("num_particles", self.num_particles, 1))
        set_("dim", _check_int("dim", self.dim, 1))
        set_("num_iterations", _check_int("num_iterations", self.num_iterations, 0))  # 0 allowed: no-op run
        set_("bound", _check_real("bound", self.bound, 0.0, math.inf, True, False))
        set_("alpha", _check_real("alpha", self.alpha, 0.0, 1.0, False, False))
        set_("eta", _check_real("eta", self.eta, 0.0, math.inf, True, False))
        set_("epsilon", _check_real("epsilon", self.epsilon, 0.0, math.inf, False, False))
        set_("gamma", _check_real("gamma", self.gamma, 0.0, 1.0, False, True))
        set_("perturb_std", _check_real("perturb_std", self.perturb_std, 0.0, math.inf, True, False))
        seed = _check_int("seed", self.seed, 0)
        if seed > U64_MAX:
            raise ValidationError("seed", f"seed must fit in 64 unsigned bits, got {seed}")
        set_("seed", seed)
        for flag in ("record_trajectory", "cheap_history"):
            if not isinstance(getattr(self, flag), (bool, np.bool_)):
                raise ValidationError(flag, f"{flag} must be a boolean, got {getattr(self, flag)!r}")
            set_(flag, bool(getattr(self, flag)))
        set_("beta", 1.0 - self.alpha)

    def to_dict(self) -> dict[str, Any]:
        """Plain mapping of the user-settable fields (``beta`` excluded)."""
        return {
            "num_particles": self.num_particles,
            "dim": self.dim,
            "num_iterations": self.num_iterations,
            "bound": self.bound,
            "alpha": self.alpha,
            "eta": self.eta,
            "epsilon": self.epsilon,
            "gamma": self.gamma,
            "perturb_std": self.perturb_std,
            "seed": self.seed,
            "record_trajectory": self.record_trajectory,
            "cheap_history": self.cheap_history,
        }


def validate_hyperparameters(raw: Mapping[str, Any]) -> Hyperparameters:
    """Build a :class:`Hyperparameters` from a loose key-value map.

    Accepts the long field names or the short symbols ``M``, ``d``, ``T``,
    ``L`` and ``sigma_delta``. ``beta`` may be given only if it equals
    ``1 - alpha``. Unknown keys are rejected.
    """
    if not isinstance(raw, Mapping):
        raise ValidationError("hyperparameters", "hyperparameters must be a mapping")
    known = set(REQUIRED) | set(DEFAULTS)
    values: dict[str, Any] = {}
    beta = None
    for key, value in raw.items():
        name = ALIASES.get(key, key)
        if name == "beta":
            beta = value
            continue
        if name not in known:
            raise ValidationError(key, f"unknown key: {key}")
        if name in values:
            raise ValidationError(key, f"duplicate key: {key} (given as both name and symbol)")
        values[name] = value
    for name in REQUIRED:
        if name not in values:
            raise ValidationError(name, f"missing required key: {name}")
    hp = Hyperparameters(**values)
    if beta is not None:
        beta = _check_real("beta", beta, 0.0, 1.0, False, False)
        if abs(beta - hp.beta) > 1e-12:
            raise ValidationError("beta", f"beta must equal 1 - alpha = {hp.beta}, got {beta}")
    return hp


@dataclass
class ParticleSystem:
    """Positions and velocities of all particles at iteration ``iteration``."""

    positions: np.ndarray
    velocities: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        if self.positions.shape != self.velocities.shape or self.positions.ndim != 2:
            raise ValueError(
                f"positions {self.positions.shape} and velocities {self.velocities.shape} "
                "must both be M x d"
            )

    @property
    def num_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def copy(self) -> "ParticleSystem":
        return ParticleSystem(self.positions.copy(), self.velocities.copy(), self.iteration)


@dataclass
class RewardHistory:
    """Mean reward after each completed iteration (the stepwise reward curve)."""

    mean_rewards: list[float] = field(default_factory=list)

    def append(self, value: float) -> None:
        if not math.isfinite(value):
            raise ValueError(f"non-finite mean reward {value}")
        self.mean_rewards.append(float(value))

    def __len__(self) -> int:
        return len(self.mean_rewards)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.mean_rewards, dtype=np.float64)


def clip_position(x, bound: float) -> np.ndarray:
    """Clamp every coordinate of ``x`` into ``[-bound, bound]``."""
    if not bound > 0:
        raise ValueError(f"bound must be positive, got {bound}")
    return np.clip(np.asarray(x, dtype=np.float64), -bound, bound)


# ---------------------------------------------------------------------------
# Keyed random streams
# ---------------------------------------------------------------------------

_INV53 = 1.0 / 9007199254740992.0  # 2**-53


def keyed_words(root_seed: int, purpose: int, particles, iteration, start: int, n: int) -> np.ndarray:
    """Raw 64-bit words ``start .. start + n - 1`` of each particle's stream.

    Returns shape ``(len(particles), n)`` for a scalar ``iteration`` and
    ``(len(particles), len(iteration), n)`` for a 1-d array of iterations.
    """
    particles = np.atleast_1d(np.asarray(particles, dtype=np.uint64))
    scalar = np.ndim(iteration) == 0
    iters = np.atleast_1d(np.asarray(iteration, dtype=np.uint64))
    if n <= 0:
        shape = (particles.size, 0) if scalar else (particles.size, iters.size, 0)
        return np.empty(shape, dtype=np.uint64)
    first_block, last_block = start // 4, (start + n - 1) // 4
    blocks = np.arange(first_block, last_block + 1, dtype=np.uint64)
    counter = np.empty((particles.size, iters.size, blocks.size, 4), dtype=np.uint64)
    counter[..., 0] = blocks[None, None, :]
    counter[..., 1] = iters[None, :, None]
    counter[..., 2] = particles[:, None, None]
    counter[..., 3] = 0
    key = np.array([root_seed, purpose], dtype=np.uint64)
    words = philox4x64(counter, key).reshape(particles.size, iters.size, -1)
    offset = start - 4 * first_block
    words = words[..., offset:offset + n]
    return words[:, 0, :] if scalar else words


def keyed_uniforms(root_seed, purpose, particles, iteration, start, n) -> np.ndarray:
    """Uniform variates on [0, 1) with 53 bits of resolution; consumes ``n`` words."""
    words = keyed_words(root_seed, purpose, particles, iteration, start, n)
    return words_to_uniforms(words)


def keyed_normals(root_seed, purpose, particles, iteration, start, n) -> np.ndarray:
    """Standard normal variates via Box-Muller; consumes ``2 * ceil(n / 2)`` words."""
    words = keyed_words(root_seed, purpose, particles, iteration, start, normal_words(n))
    return words_to_normals(words)[..., :n]


def words_to_uniforms(words: np.ndarray) -> np.ndarray:
    return (words >> np.uint64(11)).astype(np.float64) * _INV53


def words_to_normals(words: np.ndarray) -> np.ndarray:
    """Box-Muller over consecutive word pairs along the last axis (even length)."""
    u = ((words >> np.uint64(11)).astype(np.float64) + 1.0) * _INV53  # (0, 1]
    radius = np.sqrt(-2.0 * np.log(u[..., 0::2]))
    theta = 2.0 * np.pi * u[..., 1::2]
    out = np.empty(words.shape)
    out[..., 0::2] = radius * np.cos(theta)
    out[..., 1::2] = radius * np.sin(theta)
    return out


def normal_words(n: int) -> int:
    """Number of stream words consumed by ``n`` normal draws."""
    return 2 * ((n + 1) // 2)


@dataclass
class RandomStream:
    """Sequential view of one particle's keyed stream at one iteration.

    Draws advance ``draw_counter`` (counted in 64-bit words), so two streams
    built from the same key tuple always yield the same sequence.
    """

    root_seed: int
    particle_index: int
    iteration: int
    draw_counter: int = 0
    purpose: int = StreamPurpose.STEP

    def uniform(self, n: int) -> np.ndarray:
        out = keyed_uniforms(
            self.root_seed, self.purpose, self.particle_index, self.iteration, self.draw_counter, n
        )[0]
        self.draw_counter += n
        return out

    def normal(self, n: int) -> np.ndarray:
        out = keyed_normals(
            self.root_seed, self.purpose, self.particle_index, self.iteration, self.draw_counter, n
        )[0]
        self.draw_counter += normal_words(n)
        return out


def uniform_box(root_seed: int, purpose: int, particles, dim: int, bound: float) -> np.ndarray:
    """Uniform points in ``[-bound, bound]^dim``, one row per particle index."""
    u = keyed_uniforms(root_seed, purpose, particles, 0, 0, dim)
    return np.clip(-bound + 2.0 * bound * u, -bound, bound)


def init_particles(hp: Hyperparameters, rng: RandomStream | None = None) -> ParticleSystem:
    """Uniform positions on ``[-L, L]^d`` and zero velocities.

    Each particle draws from its own stream keyed by its index; ``rng`` only
    supplies the root seed (defaults to ``hp.seed``).
    """
    seed = hp.seed if rng is None else rng.root_seed
    ids = np.arange(hp.num_particles)
    positions = uniform_box(seed, StreamPurpose.INIT, ids, hp.dim, hp.bound)
    return ParticleSystem(positions, np.zeros_like(positions), 0)
