"""Reward-guided, gradient-free particle sampling for unnormalized densities."""

from rparvi.baseline_mh import MhConfig, mh_run, mh_step
from rparvi.core import (
    Hyperparameters,
    ParticleSystem,
    RandomStream,
    RewardHistory,
    ValidationError,
    clip_position,
    init_particles,
    validate_hyperparameters,
)
from rparvi.engine import DensityError, RunResult, StepOutcome, run, step_particle, step_system
from rparvi.reward import RewardWeights, entropy_term, reward
from rparvi.target import (
    BananaTarget,
    CallableTarget,
    GaussianTarget,
    MixtureSpec,
    MixtureTarget,
    RingTarget,
    ScaledTarget,
    TargetDensity,
    target_from_descriptor,
)

__version__ = "0.1.0"

__all__ = [
    "BananaTarget",
    "CallableTarget",
    "DensityError",
    "GaussianTarget",
    "Hyperparameters",
    "MhConfig",
    "MixtureSpec",
    "MixtureTarget",
    "ParticleSystem",
    "RandomStream",
    "RewardHistory",
    "RewardWeights",
    "RingTarget",
    "RunResult",
    "ScaledTarget",
    "StepOutcome",
    "TargetDensity",
    "ValidationError",
    "clip_position",
    "entropy_term",
    "init_particles",
    "mh_run",
    "mh_step",
    "reward",
    "run",
    "step_particle",
    "step_system",
    "target_from_descriptor",
    "validate_hyperparameters",
]
