"""Multi-chain random-walk Metropolis-Hastings over a :class:`TargetDensity`.

Used as a reference sampler. Chains are unconstrained (no clipping); the
box only sets the uniform starting points.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from rparvi.core import (
    U64_MAX,
    RandomStream,
    StreamPurpose,
    ValidationError,
    keyed_words,
    normal_words,
    uniform_box,
    words_to_normals,
    words_to_uniforms,
)
from rparvi.engine import DensityError
from rparvi.target import TargetDensity

__all__ = ["MhConfig", "accept_probability", "mh_run", "mh_run_trace", "mh_step"]


@dataclass(frozen=True)
class MhConfig:
    num_chains: int
    steps: int
    proposal_std: float
    bound: float
    burn_in: int = 0
    seed: int = 0

    def __post_init__(self):
        def bad(key, msg):
            raise ValidationError(key, f"{key} {msg}")

        for key in ("num_chains", "steps"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
                bad(key, f"must be an integer, got {value!r}")
            if value < 1:
                bad(key, "must be positive")
        for key in ("proposal_std", "bound"):
            value = getattr(self, key)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not np.isfinite(value):
                bad(key, f"must be a finite number, got {value!r}")
            if value <= 0:
                bad(key, "must be positive")
        if isinstance(self.burn_in, bool) or not isinstance(self.burn_in, (int, np.integer)) or self.burn_in < 0:
            bad("burn_in", f"must be a nonnegative integer, got {self.burn_in!r}")
        if self.burn_in >= self.steps:
            bad("burn_in", f"must be smaller than steps ({self.steps}), got {self.burn_in}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed <= U64_MAX:
            bad("seed", f"must be a 64-bit unsigned integer, got {self.seed!r}")

    @classmethod
    def from_mapping(cls, raw: Mapping[str, Any], **defaults) -> "MhConfig":
        allowed = {"num_chains", "steps", "proposal_std", "bound", "burn_in", "seed"}
        for key in raw:
            if key not in allowed:
                raise ValidationError(f"baseline.{key}", f"unknown key: {key}")
        merged = {**defaults, **raw}
        for key in ("num_chains", "steps", "proposal_std", "bound"):
            if key not in merged:
                raise ValidationError(f"baseline.{key}", f"missing required key: baseline.{key}")
        return cls(**merged)

    def to_dict(self) -> dict[str, Any]:
        return {
            "num_chains": self.num_chains,
            "steps": self.steps,
            "proposal_std": self.proposal_std,
            "bound": self.bound,
            "burn_in": self.burn_in,
            "seed": self.seed,
        }


def accept_probability(p_current: float, p_proposed: float) -> float:
    """``min(1, p'/p)``; a zero-density current state accepts anything."""
    if p_proposed >= p_current:
        return 1.0
    return p_proposed / p_current


def _accept(p_cur: np.ndarray, p_prop: np.ndarray, u: np.ndarray) -> np.ndarray:
    # u * p < p'  <=>  u < p'/p without dividing by a zero density
    return (p_prop >= p_cur) | (u * p_cur < p_prop)


def _density(target, points, ids, step):
    values = np.asarray(target.evaluate(points), dtype=np.float64)
    bad = ~np.isfinite(values) | (values < 0)
    if bad.any():
        i = int(np.argmax(bad))
        raise DensityError(int(ids[i]), step, float(values[i]), "chain state")
    return values


def mh_step(x, target: TargetDensity, proposal_std: float, rng: RandomStream) -> np.ndarray:
    """One random-walk MH transition; draws d normals then one uniform from ``rng``."""
    if not proposal_std > 0:
        raise ValueError(f"proposal_std must be positive, got {proposal_std}")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    proposal = x + proposal_std * rng.normal(x.shape[1])[None, :]
    u = rng.uniform(1)
    ids = np.array([rng.particle_index])
    p_cur = _density(target, x, ids, rng.iteration)
    p_prop = _density(target, proposal, ids, rng.iteration)
    return (proposal if _accept(p_cur, p_prop, u)[0] else x)[0]


# steps whose random words are generated in one call
_STEP_BATCH = 256


def _advance_chains(x, ids, cfg: MhConfig, target, thin):
    d = x.shape[1]
    nw = normal_words(d)
    kept = []
    p_cur = _density(target, x, ids, 0)
    for batch_start in range(1, cfg.steps + 1, _STEP_BATCH):
        steps = np.arange(batch_start, min(batch_start + _STEP_BATCH, cfg.steps + 1))
        words = keyed_words(cfg.seed, StreamPurpose.MH_STEP, ids, steps, 0, nw + 1)
        z_all = words_to_normals(words[..., :nw])[..., :d]
        u_all = words_to_uniforms(words[..., nw])
        for j, step in enumerate(steps.tolist()):
            proposal = x + cfg.proposal_std * z_all[:, j, :]
            p_prop = _density(target, proposal, ids, step)
            acc = _accept(p_cur, p_prop, u_all[:, j])
            x = np.where(acc[:, None], proposal, x)
            p_cur = np.where(acc, p_prop, p_cur)
            if thin and step > cfg.burn_in and (step - cfg.burn_in) % thin == 0:
                kept.append(x.copy())
    return x, kept


def _run(cfg: MhConfig, target: TargetDensity, workers: int, thin: int):
    ids = np.arange(cfg.num_chains)
    x0 = uniform_box(cfg.seed, StreamPurpose.MH_INIT, ids, target.dim, cfg.bound)
    n_chunks = min(workers or (os.cpu_count() or 1), cfg.num_chains)
    chunks = np.array_split(ids, n_chunks)

    def work(chunk):
        return _advance_chains(x0[chunk], chunk, cfg, target, thin)

    if n_chunks == 1:
        results = [work(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=n_chunks) as pool:
            results = list(pool.map(work, chunks))
    final = np.concatenate([r[0] for r in results], axis=0)
    trace = None
    if thin:
        per_chunk = [np.stack(r[1], axis=1) for r in results]  # (chains, kept, d)
        trace = np.concatenate(per_chunk, axis=0)
    return final, trace


def mh_run(cfg: MhConfig, target: TargetDensity, *, workers: int = 1) -> np.ndarray:
    """Final state of every chain, shape ``(num_chains, d)``."""
    return _run(cfg, target, workers, 0)[0]


def mh_run_trace(cfg: MhConfig, target: TargetDensity, thin: int, *, workers: int = 1):
    """Final states plus every ``thin``-th post-burn-in state of every chain.

    The trace has shape ``(num_chains, kept, d)``.
    """
    if thin < 1:
        raise ValueError(f"thin must be positive, got {thin}")
    return _run(cfg, target, workers, thin)
