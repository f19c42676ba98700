"""Reward-guided particle updates and the full sampler loop.

One iteration, for every particle independently:

1. probe ``x' = x + delta`` with ``delta ~ N(0, perturb_std^2 I)``;
2. if ``R(x') > R(x)`` add ``eta * delta`` to the velocity, otherwise
   multiply the velocity by ``gamma``;
3. move to ``clip(x + v + e)`` with ``e ~ N(0, epsilon^2 I)``.

The mean reward at the new positions is recorded after each iteration.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from rparvi.core import (
    Hyperparameters,
    ParticleSystem,
    RandomStream,
    RewardHistory,
    StreamPurpose,
    clip_position,
    init_particles,
    keyed_words,
    normal_words,
    words_to_normals,
)
from rparvi.reward import RewardWeights, reward
from rparvi.target import TargetDensity

__all__ = [
    "DensityError",
    "RunResult",
    "StepOutcome",
    "run",
    "step_particle",
    "step_system",
]


class DensityError(RuntimeError):
    """Target returned a non-finite or negative value; the run is aborted."""

    def __init__(self, particle: int, iteration: int, value: float, where: str = "position"):
        super().__init__(
            f"target density is {value!r} at the {where} of particle {particle} in iteration {iteration}"
        )
        self.particle = particle
        self.iteration = iteration
        self.value = value


@dataclass
class StepOutcome:
    accepted: bool
    new_position: np.ndarray
    new_velocity: np.ndarray
    reward_at_new_position: float


@dataclass
class RunResult:
    final_system: ParticleSystem
    history: RewardHistory
    trajectory: list[np.ndarray] | None = None
    metrics_summary: Any = None
    acceptance_rate: list[float] = field(default_factory=list)

    @property
    def positions(self) -> np.ndarray:
        return self.final_system.positions


def _density(target: TargetDensity, points: np.ndarray, ids: np.ndarray, iteration: int, where: str):
    values = np.asarray(target.evaluate(points), dtype=np.float64)
    bad = ~np.isfinite(values) | (values < 0)
    if bad.any():
        i = int(np.argmax(bad))
        raise DensityError(int(ids[i]), iteration, float(values[i]), where)
    return values


def _update(x, v, delta, explore, ids, iteration, target, hp: Hyperparameters):
    """Vectorized update of a block of particles given their noise draws.

    Returns ``(accepted, x_new, v_new, reward_new)``.
    """
    weights = RewardWeights(hp.alpha, hp.beta)
    r_cur = reward(_density(target, x, ids, iteration, "current position"), weights)
    x_test = x + delta
    r_test = reward(_density(target, x_test, ids, iteration, "test position"), weights)
    accepted = r_test > r_cur
    v_new = np.where(accepted[:, None], v + hp.eta * delta, hp.gamma * v)
    x_new = clip_position(x + v_new + explore, hp.bound)
    if hp.cheap_history:
        r_new = r_test
    else:
        r_new = reward(_density(target, x_new, ids, iteration, "new position"), weights)
    return accepted, x_new, v_new, r_new


def step_particle(x, v, target: TargetDensity, hp: Hyperparameters, rng: RandomStream) -> StepOutcome:
    """Advance one particle by one iteration, drawing delta then e from ``rng``."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    v = np.asarray(v, dtype=np.float64).reshape(1, -1)
    if x.shape != v.shape or x.shape[1] != hp.dim:
        raise ValueError(f"position {x.shape} and velocity {v.shape} must both have dimension {hp.dim}")
    delta = hp.perturb_std * rng.normal(hp.dim)
    explore = hp.epsilon * rng.normal(hp.dim)
    ids = np.array([rng.particle_index])
    accepted, x_new, v_new, r_new = _update(
        x, v, delta[None, :], explore[None, :], ids, rng.iteration, target, hp
    )
    return StepOutcome(bool(accepted[0]), x_new[0], v_new[0], float(r_new[0]))


def _step_block(x, v, ids, iteration, target, hp):
    # delta takes the first normal_words(d) words of the stream, e the next ones
    nw = normal_words(hp.dim)
    words = keyed_words(hp.seed, StreamPurpose.STEP, ids, iteration, 0, 2 * nw)
    z_delta = words_to_normals(words[:, :nw])[:, :hp.dim]
    z_explore = words_to_normals(words[:, nw:])[:, :hp.dim]
    return _update(x, v, hp.perturb_std * z_delta, hp.epsilon * z_explore, ids, iteration, target, hp)


def _resolve_workers(workers: int) -> int:
    if workers < 0:
        raise ValueError(f"workers must be >= 0, got {workers}")
    return workers or (os.cpu_count() or 1)


def step_system(
    sys: ParticleSystem,
    target: TargetDensity,
    hp: Hyperparameters,
    *,
    workers: int = 1,
    executor: ThreadPoolExecutor | None = None,
    order: str = "forward",
    return_acceptance: bool = False,
):
    """Advance every particle by one iteration.

    Particles are split into contiguous chunks, one per worker; each chunk is
    processed with its own keyed streams, so the result does not depend on
    ``workers``, ``order`` or scheduling. The mean reward is summed in
    particle-index order.

    Returns ``(new_system, mean_reward)``, plus the acceptance rate when
    ``return_acceptance`` is set.
    """
    m, d = sys.positions.shape
    if m != hp.num_particles or d != hp.dim:
        raise ValueError(f"system shape {(m, d)} does not match hyperparameters {(hp.num_particles, hp.dim)}")
    if target.dim != hp.dim:
        raise ValueError(f"target dimension {target.dim} does not match dim={hp.dim}")
    iteration = sys.iteration + 1
    ids = np.arange(m)
    n_chunks = min(_resolve_workers(workers), m)
    chunks = np.array_split(ids, n_chunks)
    if order == "reverse":
        chunks = chunks[::-1]
    elif order != "forward":
        raise ValueError(f"order must be 'forward' or 'reverse', got {order!r}")

    def work(chunk):
        return chunk, _step_block(sys.positions[chunk], sys.velocities[chunk], chunk, iteration, target, hp)

    if n_chunks == 1:
        results = [work(chunks[0])]
    elif executor is not None:
        results = list(executor.map(work, chunks))
    else:
        with ThreadPoolExecutor(max_workers=n_chunks) as pool:
            results = list(pool.map(work, chunks))

    positions = np.empty_like(sys.positions)
    velocities = np.empty_like(sys.velocities)
    rewards = np.empty(m)
    accepted = np.empty(m, dtype=bool)
    for chunk, (acc, x_new, v_new, r_new) in results:
        positions[chunk] = x_new
        velocities[chunk] = v_new
        rewards[chunk] = r_new
        accepted[chunk] = acc
    mean_reward = math.fsum(rewards.tolist()) / m
    new_sys = ParticleSystem(positions, velocities, iteration)
    if return_acceptance:
        return new_sys, mean_reward, float(accepted.mean())
    return new_sys, mean_reward


def run(
    hp: Hyperparameters,
    target: TargetDensity,
    *,
    workers: int = 1,
    callback: Callable[[int, float], None] | None = None,
    check_bounds: bool = False,
) -> RunResult:
    """Initialize particles uniformly in the box and iterate ``hp.num_iterations`` times.

    ``callback(t, mean_reward)`` is called after every iteration.
    ``check_bounds`` asserts the box invariant after each step (debug aid).
    """
    if target.dim != hp.dim:
        raise ValueError(f"target dimension {target.dim} does not match dim={hp.dim}")
    system = init_particles(hp)
    history = RewardHistory()
    trajectory = [] if hp.record_trajectory else None
    acceptance = []
    n_workers = min(_resolve_workers(workers), hp.num_particles)
    pool = ThreadPoolExecutor(max_workers=n_workers) if n_workers > 1 else None
    try:
        for _ in range(hp.num_iterations):
            system, mean_reward, acc = step_system(
                system, target, hp, workers=n_workers, executor=pool, return_acceptance=True
            )
            if check_bounds and np.any(np.abs(system.positions) > hp.bound):
                raise AssertionError(f"particle left the box in iteration {system.iteration}")
            history.append(mean_reward)
            acceptance.append(acc)
            if trajectory is not None:
                trajectory.append(system.positions.copy())
            if callback is not None:
                callback(system.iteration, mean_reward)
    finally:
        if pool is not None:
            pool.shutdown()
    return RunResult(system, history, trajectory, None, acceptance)
