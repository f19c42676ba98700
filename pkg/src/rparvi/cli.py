"""Command-line entry point: YAML config in, CSV particles and JSON summary out.

Config grammar (YAML; every section is a mapping, unknown keys are errors)::

    hyperparameters:        # required; long names or M, d, T, L, sigma_delta
      num_particles: 500
      dim: 1
      num_iterations: 2000
      bound: 5.0
      alpha: 0.6            # optional, defaults as in rparvi.core.DEFAULTS
      seed: 0
    target: gaussian        # or {kind: gaussian|mixture|banana|ring, ...params}
    baseline:               # optional Metropolis-Hastings reference run
      num_chains: 256
      steps: 5000
      proposal_std: 1.0
      burn_in: 1000         # seed and bound default to the hyperparameters
    output:                 # optional
      directory: rparvi_output
      trajectory: false
      metrics: true
      ks: true              # KS per dimension when the target has closed-form marginals
      mode_centers: [[-2.0], [2.0]]
      mode_radius: 1.0
      mmd_bandwidth: median
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from rparvi.baseline_mh import MhConfig, mh_run
from rparvi.core import Hyperparameters, ValidationError, validate_hyperparameters
from rparvi.engine import DensityError, RunResult, run
from rparvi.metrics import MetricsReport, compute_report
from rparvi.target import TargetDensity, target_from_descriptor

__all__ = [
    "OutputConfig",
    "RunConfig",
    "dump_config",
    "main",
    "parse_config",
    "run_command",
    "write_outputs",
]

log = logging.getLogger("rparvi")

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 1, 2

SECTIONS = ("hyperparameters", "target", "baseline", "output")


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "rparvi_output"
    trajectory: bool | None = None
    metrics: bool = True
    ks: bool = True
    mode_centers: tuple[tuple[float, ...], ...] | None = None
    mode_radius: float | None = None
    mmd_bandwidth: float | str = "median"

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"directory": self.directory, "metrics": self.metrics, "ks": self.ks}
        if self.trajectory is not None:
            out["trajectory"] = self.trajectory
        if self.mode_centers is not None:
            out["mode_centers"] = [list(c) for c in self.mode_centers]
            out["mode_radius"] = self.mode_radius
        out["mmd_bandwidth"] = self.mmd_bandwidth
        return out


@dataclass(frozen=True)
class RunConfig:
    hyperparameters: Hyperparameters
    target: dict[str, Any]
    baseline_raw: dict[str, Any] | None = None
    output: OutputConfig = field(default_factory=OutputConfig)

    def build_target(self) -> TargetDensity:
        return target_from_descriptor(self.target, self.hyperparameters.dim)

    @property
    def baseline(self) -> MhConfig | None:
        if self.baseline_raw is None:
            return None
        hp = self.hyperparameters
        return MhConfig.from_mapping(self.baseline_raw, seed=hp.seed, bound=hp.bound)

    def with_overrides(self, *, seed: int | None = None, output_dir: str | None = None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = dataclasses.replace(cfg, hyperparameters=_replace_hp(cfg.hyperparameters, seed=seed))
        if output_dir is not None:
            cfg = dataclasses.replace(cfg, output=dataclasses.replace(cfg.output, directory=output_dir))
        return cfg


def _replace_hp(hp: Hyperparameters, **changes) -> Hyperparameters:
    return Hyperparameters(**{**hp.to_dict(), **changes})


def _prefixed(section: str, exc: ValidationError) -> ValidationError:
    key = exc.key if exc.key.startswith(section) else f"{section}.{exc.key}"
    return ValidationError(key, f"{section}: {exc}")


def _bool(path: str, value: Any) -> bool:
    if not isinstance(value, bool):
        raise ValidationError(path, f"{path}: expected true/false, got {value!r}")
    return value


def _parse_output(raw: Any) -> OutputConfig:
    if raw is None:
        return OutputConfig()
    if not isinstance(raw, Mapping):
        raise ValidationError("output", "output: expected a mapping")
    allowed = {f.name for f in dataclasses.fields(OutputConfig)}
    for key in raw:
        if key not in allowed:
            raise ValidationError(f"output.{key}", f"output: unknown key: {key}")
    values: dict[str, Any] = {}
    if "directory" in raw:
        if not isinstance(raw["directory"], str) or not raw["directory"]:
            raise ValidationError("output.directory", "output.directory: expected a path string")
        values["directory"] = raw["directory"]
    for key in ("trajectory", "metrics", "ks"):
        if key in raw:
            values[key] = _bool(f"output.{key}", raw[key])
    if ("mode_centers" in raw) != ("mode_radius" in raw):
        raise ValidationError("output.mode_radius", "output: mode_centers and mode_radius go together")
    if "mode_centers" in raw:
        centers = raw["mode_centers"]
        if not isinstance(centers, list) or not centers:
            raise ValidationError("output.mode_centers", "output.mode_centers: expected a nonempty list")
        parsed = []
        for i, c in enumerate(centers):
            c = [c] if isinstance(c, (int, float)) and not isinstance(c, bool) else c
            if not isinstance(c, list) or not all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in c
            ):
                raise ValidationError(f"output.mode_centers[{i}]", f"output.mode_centers[{i}]: expected numbers")
            parsed.append(tuple(float(v) for v in c))
        values["mode_centers"] = tuple(parsed)
        radius = raw["mode_radius"]
        if isinstance(radius, bool) or not isinstance(radius, (int, float)) or not radius > 0:
            raise ValidationError("output.mode_radius", "output.mode_radius: expected a positive number")
        values["mode_radius"] = float(radius)
    if "mmd_bandwidth" in raw:
        bw = raw["mmd_bandwidth"]
        ok = bw == "median" or (isinstance(bw, (int, float)) and not isinstance(bw, bool) and bw > 0)
        if not ok:
            raise ValidationError("output.mmd_bandwidth", "output.mmd_bandwidth: expected 'median' or a positive number")
        values["mmd_bandwidth"] = bw if bw == "median" else float(bw)
    return OutputConfig(**values)


def config_from_mapping(doc: Any) -> RunConfig:
    """Validate an already-loaded config mapping."""
    if not isinstance(doc, Mapping):
        raise ValidationError("config", "config document must be a mapping")
    for key in doc:
        if key not in SECTIONS:
            raise ValidationError(str(key), f"unknown key: {key}")
    if "hyperparameters" not in doc:
        raise ValidationError("hyperparameters", "missing required section: hyperparameters")
    if "target" not in doc:
        raise ValidationError("target", "missing required section: target")

    output = _parse_output(doc.get("output"))
    raw_hp = doc["hyperparameters"]
    if not isinstance(raw_hp, Mapping):
        raise ValidationError("hyperparameters", "hyperparameters: expected a mapping")
    raw_hp = dict(raw_hp)
    if output.trajectory is not None:
        if "record_trajectory" in raw_hp and raw_hp["record_trajectory"] != output.trajectory:
            raise ValidationError(
                "output.trajectory", "output.trajectory conflicts with hyperparameters.record_trajectory"
            )
        raw_hp["record_trajectory"] = output.trajectory
    try:
        hp = validate_hyperparameters(raw_hp)
    except ValidationError as exc:
        raise _prefixed("hyperparameters", exc) from exc

    target = target_from_descriptor(doc["target"], hp.dim)

    baseline_raw = doc.get("baseline")
    if baseline_raw is not None:
        if not isinstance(baseline_raw, Mapping):
            raise ValidationError("baseline", "baseline: expected a mapping")
        baseline_raw = dict(baseline_raw)
    cfg = RunConfig(hp, target.descriptor(), baseline_raw, output)
    if baseline_raw is not None:
        try:
            cfg.baseline
        except ValidationError as exc:
            raise _prefixed("baseline", exc) from exc
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML config document."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError("config", f"malformed config: {exc}") from exc
    return config_from_mapping(doc)


def config_to_mapping(cfg: RunConfig) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "hyperparameters": cfg.hyperparameters.to_dict(),
        "target": dict(cfg.target),
        "output": cfg.output.to_dict(),
    }
    if cfg.baseline_raw is not None:
        doc["baseline"] = dict(cfg.baseline_raw)
    return doc


def dump_config(cfg: RunConfig) -> str:
    """YAML text that :func:`parse_config` turns back into an equal config."""
    return yaml.safe_dump(config_to_mapping(cfg), sort_keys=False)


# ---------------------------------------------------------------------------
# Outputs
# ---------------------------------------------------------------------------

_FLOAT_FMT = "%.17g"


def _dim_header(d: int) -> list[str]:
    return [f"dim_{i}" for i in range(d)]


def write_particles(path: Path, positions: np.ndarray) -> None:
    m, d = positions.shape
    table = np.column_stack([np.arange(m), positions])
    np.savetxt(
        path, table, fmt=["%d"] + [_FLOAT_FMT] * d, delimiter=",",
        header=",".join(["particle_id", *_dim_header(d)]), comments="",
    )


def read_particles(path: Path) -> np.ndarray:
    """Positions from a ``particles.csv`` file, rows ordered by particle id."""
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return table[np.argsort(table[:, 0], kind="stable"), 1:]


def write_outputs(
    result: RunResult,
    cfg: RunConfig,
    *,
    baseline_samples: np.ndarray | None = None,
    summary: Mapping[str, Any] | None = None,
) -> list[Path]:
    """Write particles, reward history, optional trajectory/baseline, and the summary."""
    out = Path(cfg.output.directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "particles.csv"
    write_particles(path, result.final_system.positions)
    written.append(path)

    path = out / "reward_history.csv"
    history = result.history.as_array()
    table = np.column_stack([np.arange(1, history.size + 1), history]) if history.size else np.empty((0, 2))
    np.savetxt(path, table, fmt=["%d", _FLOAT_FMT], delimiter=",", header="iteration,mean_reward", comments="")
    written.append(path)

    if result.trajectory is not None:
        path = out / "trajectory.csv"
        m, d = result.final_system.positions.shape
        with open(path, "w") as fh:
            fh.write(",".join(["iteration", "particle_id", *_dim_header(d)]) + "\n")
            ids = np.arange(m)
            for t, snapshot in enumerate(result.trajectory, start=1):
                block = np.column_stack([np.full(m, t), ids, snapshot])
                np.savetxt(fh, block, fmt=["%d", "%d"] + [_FLOAT_FMT] * d, delimiter=",")
        written.append(path)

    if baseline_samples is not None:
        path = out / "baseline_samples.csv"
        write_particles(path, baseline_samples)
        written.append(path)

    if summary is not None:
        path = out / "summary.json"
        path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


class _Progress:
    """Logs one line each time another tenth of the iterations completes."""

    def __init__(self, total: int):
        self.total = total
        self.last_decile = 0

    def __call__(self, t: int, mean_reward: float) -> None:
        decile = 10 * t // self.total
        if decile > self.last_decile:
            self.last_decile = decile
            log.info("iteration %d/%d (%d%%) mean_reward=%.6g", t, self.total, 10 * decile, mean_reward)


def _metrics(samples, target: TargetDensity, cfg: RunConfig, reference=None) -> MetricsReport:
    out = cfg.output
    cdfs = [target.marginal_cdf(i) for i in range(target.dim)] if out.ks else None
    return compute_report(
        samples,
        marginal_cdfs=cdfs,
        reference=reference,
        mmd_bandwidth=out.mmd_bandwidth,
        mode_centers=out.mode_centers,
        mode_radius=out.mode_radius,
    )


def run_command(cfg: RunConfig, *, workers: int = 1) -> int:
    """Run the sampler (and baseline, if configured), write outputs, return an exit status."""
    try:
        target = cfg.build_target()
        baseline = cfg.baseline
    except ValidationError as exc:
        log.error("invalid config: %s", exc)
        return EXIT_INVALID
    hp = cfg.hyperparameters

    start = time.perf_counter()
    try:
        result = run(hp, target, workers=workers, callback=_Progress(hp.num_iterations) if hp.num_iterations else None)
        baseline_samples = mh_run(baseline, target, workers=workers) if baseline is not None else None
    except DensityError as exc:
        log.error("numeric abort: %s", exc)
        return EXIT_NUMERIC
    wall = time.perf_counter() - start

    summary: dict[str, Any] = {
        "config": config_to_mapping(cfg),
        "wall_time_seconds": wall,
        "num_iterations_completed": len(result.history),
        "final_mean_reward": result.history.mean_rewards[-1] if len(result.history) else None,
        "mean_acceptance_rate": float(np.mean(result.acceptance_rate)) if result.acceptance_rate else None,
    }
    try:
        if cfg.output.metrics and hp.num_particles >= 2:
            report = _metrics(result.positions, target, cfg, reference=baseline_samples)
            result.metrics_summary = report
            summary["metrics"] = report.to_dict()
            if baseline_samples is not None and baseline.num_chains >= 2:
                summary["baseline_metrics"] = _metrics(baseline_samples, target, cfg).to_dict()
    except ValueError as exc:
        log.warning("metrics skipped: %s", exc)
        summary["metrics_error"] = str(exc)

    try:
        written = write_outputs(result, cfg, baseline_samples=baseline_samples, summary=summary)
    except OSError as exc:
        log.error("cannot write outputs: %s", exc)
        return EXIT_INVALID
    log.info("wrote %s", ", ".join(str(p) for p in written))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rparvi", description="Reward-guided gradient-free particle sampler.")
    parser.add_argument("--config", required=True, type=Path, help="YAML run config")
    parser.add_argument("--seed", type=int, default=None, help="root seed (overrides config)")
    parser.add_argument("--output-dir", default=None, help="output directory (overrides config)")
    parser.add_argument("--workers", type=int, default=1, help="worker threads per iteration; 0 = all CPUs")
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    if args.workers < 0:
        log.error("--workers must be >= 0")
        return EXIT_INVALID
    try:
        cfg = parse_config(args.config.read_text())
        cfg = cfg.with_overrides(seed=args.seed, output_dir=args.output_dir)
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_INVALID
    except ValidationError as exc:
        log.error("invalid config: %s", exc)
        return EXIT_INVALID
    return run_command(cfg, workers=args.workers)


if __name__ == "__main__":
    sys.exit(main())
