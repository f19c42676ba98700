import json
import textwrap

import numpy as np
import pytest

from rparvi.cli import RunConfig, dump_config, main, parse_config, read_particles, run_command, write_outputs
from rparvi.core import ValidationError
from rparvi.engine import run
from rparvi.target import CallableTarget

MINIMAL = """
hyperparameters: {M: 20, d: 2, T: 15, L: 4}
target: gaussian
"""


def write_config(tmp_path, text, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(textwrap.dedent(text))
    return path


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = parse_config(MINIMAL)
        hp = cfg.hyperparameters
        assert (hp.alpha, hp.gamma, hp.epsilon, hp.eta, hp.perturb_std) == (0.6, 0.9, 0.1, 0.1, 0.1)
        assert cfg.target == {"kind": "gaussian", "mean": [0.0, 0.0], "std": 1.0}
        assert cfg.baseline is None

    def test_alpha_out_of_range(self):
        with pytest.raises(ValidationError, match="alpha") as err:
            parse_config("hyperparameters: {M: 2, d: 1, T: 1, L: 1, alpha: 1.5}\ntarget: gaussian\n")
        assert err.value.key == "hyperparameters.alpha"

    @pytest.mark.parametrize(
        "doc",
        [
            "hyperparameters: {M: 2, d: 1, T: 1, L: 1, momentum: 0.5}\ntarget: gaussian\n",
            "hyperparameters: {M: 2, d: 1, T: 1, L: 1}\ntarget: gaussian\nmomentum: 0.5\n",
        ],
    )
    def test_unknown_key(self, doc):
        with pytest.raises(ValidationError, match="unknown key: momentum"):
            parse_config(doc)

    def test_missing_target(self):
        with pytest.raises(ValidationError, match="target"):
            parse_config("hyperparameters: {M: 2, d: 1, T: 1, L: 1}\n")

    def test_type_mismatch_has_path(self):
        with pytest.raises(ValidationError) as err:
            parse_config("hyperparameters: {M: 2, d: 1, T: 1, L: 1}\ntarget: {kind: gaussian, std: wide}\n")
        assert err.value.key == "target.std"
        with pytest.raises(ValidationError) as err:
            parse_config("hyperparameters: {M: 2, d: 1, T: 1, L: 1}\ntarget: gaussian\noutput: {trajectory: 3}\n")
        assert err.value.key == "output.trajectory"

    def test_malformed_yaml(self):
        with pytest.raises(ValidationError, match="malformed"):
            parse_config("hyperparameters: {M: 2\n")

    def test_baseline_defaults_and_errors(self):
        cfg = parse_config(MINIMAL + "baseline: {num_chains: 8, steps: 20, proposal_std: 0.5}\n")
        assert cfg.baseline.seed == cfg.hyperparameters.seed
        assert cfg.baseline.bound == cfg.hyperparameters.bound
        with pytest.raises(ValidationError, match="burn_in"):
            parse_config(MINIMAL + "baseline: {num_chains: 8, steps: 20, proposal_std: 0.5, burn_in: 20}\n")

    def test_round_trip(self):
        doc = MINIMAL + textwrap.dedent(
            """
            baseline: {num_chains: 8, steps: 20, proposal_std: 0.5, burn_in: 5}
            output:
              directory: somewhere
              trajectory: true
              mode_centers: [[0, 0], [1, 1]]
              mode_radius: 0.5
              mmd_bandwidth: 1.5
            """
        )
        cfg = parse_config(doc)
        again = parse_config(dump_config(cfg))
        assert again == cfg
        assert dump_config(again) == dump_config(cfg)

    def test_trajectory_conflict(self):
        with pytest.raises(ValidationError, match="conflicts"):
            parse_config(
                "hyperparameters: {M: 2, d: 1, T: 1, L: 1, record_trajectory: false}\n"
                "target: gaussian\noutput: {trajectory: true}\n"
            )

    def test_overrides(self):
        cfg = parse_config(MINIMAL).with_overrides(seed=77, output_dir="x")
        assert cfg.hyperparameters.seed == 77 and cfg.output.directory == "x"


class TestOutputs:
    def test_files_and_line_counts(self, tmp_path):
        cfg = parse_config(
            f"hyperparameters: {{M: 2, d: 1, T: 5, L: 2}}\ntarget: gaussian\n"
            f"output: {{directory: '{tmp_path}', trajectory: true}}\n"
        )
        result = run(cfg.hyperparameters, cfg.build_target())
        write_outputs(result, cfg)
        assert len((tmp_path / "particles.csv").read_text().splitlines()) == 3
        history = (tmp_path / "reward_history.csv").read_text().splitlines()
        assert len(history) == 6 and history[0] == "iteration,mean_reward"
        traj = (tmp_path / "trajectory.csv").read_text().splitlines()
        assert traj[0] == "iteration,particle_id,dim_0" and len(traj) == 1 + 5 * 2

    def test_particles_round_trip_bitwise(self, tmp_path):
        cfg = parse_config(f"hyperparameters: {{M: 50, d: 3, T: 20, L: 3}}\ntarget: gaussian\noutput: {{directory: '{tmp_path}'}}\n")
        result = run(cfg.hyperparameters, cfg.build_target())
        write_outputs(result, cfg)
        header = (tmp_path / "particles.csv").read_text().splitlines()[0]
        assert header == "particle_id,dim_0,dim_1,dim_2"
        assert read_particles(tmp_path / "particles.csv").tobytes() == result.positions.tobytes()
        history = np.loadtxt(tmp_path / "reward_history.csv", delimiter=",", skiprows=1)
        assert history[:, 1].tobytes() == result.history.as_array().tobytes()


class TestRunCommand:
    def test_valid_run(self, tmp_path, capsys):
        path = write_config(
            tmp_path,
            f"""
            hyperparameters: {{M: 30, d: 1, T: 40, L: 5}}
            target: {{kind: mixture, components: [{{weight: 0.5, mean: [-2], std: 0.5}}, {{weight: 0.5, mean: [2], std: 0.5}}]}}
            baseline: {{num_chains: 16, steps: 50, proposal_std: 1.0, burn_in: 10}}
            output: {{directory: '{tmp_path / "out"}', mode_centers: [[-2], [2]], mode_radius: 1.0}}
            """,
        )
        assert main(["--config", str(path)]) == 0
        out = tmp_path / "out"
        for name in ("particles.csv", "reward_history.csv", "summary.json", "baseline_samples.csv"):
            assert (out / name).exists()
        summary = json.loads((out / "summary.json").read_text())
        assert np.isfinite(summary["metrics"]["mmd_squared"])
        assert len(summary["metrics"]["ks_per_dim"]) == 1
        assert len(summary["metrics"]["mode_occupancy"]) == 2
        assert summary["config"]["hyperparameters"]["num_particles"] == 30
        progress = [line for line in capsys.readouterr().err.splitlines() if "mean_reward=" in line]
        assert len(progress) == 10

    def test_quiet(self, tmp_path, capsys):
        path = write_config(tmp_path, MINIMAL)
        assert main(["--config", str(path), "--quiet", "--output-dir", str(tmp_path / "q")]) == 0
        assert capsys.readouterr().err == ""

    def test_dim_mismatch_exit_1(self, tmp_path, capsys):
        path = write_config(tmp_path, "hyperparameters: {M: 2, d: 3, T: 1, L: 1}\ntarget: banana\n")
        assert main(["--config", str(path), "--output-dir", str(tmp_path / "o")]) == 1
        assert "dimension" in capsys.readouterr().err

    def test_missing_config_exit_1(self, tmp_path):
        assert main(["--config", str(tmp_path / "nope.yaml")]) == 1

    def test_nan_exit_2(self, tmp_path, caplog, monkeypatch):
        def fn(p):
            out = np.exp(-np.sum(p * p, axis=1))
            out[np.abs(p[:, 0]) > 2.0] = np.nan
            return out

        cfg = parse_config(f"hyperparameters: {{M: 40, d: 1, T: 10, L: 5}}\ntarget: gaussian\noutput: {{directory: '{tmp_path}'}}\n")
        monkeypatch.setattr(RunConfig, "build_target", lambda self: CallableTarget(fn, 1, vectorized=True))
        assert run_command(cfg) == 2
        assert "particle 1 in iteration 1" in caplog.text
        assert not (tmp_path / "particles.csv").exists()

    def test_seed_flag_and_repeatability(self, tmp_path):
        path = write_config(tmp_path, MINIMAL)
        outs = []
        for name, seed in (("a", "5"), ("b", "5"), ("c", "6")):
            assert main(["--config", str(path), "--seed", seed, "--output-dir", str(tmp_path / name), "--quiet"]) == 0
            outs.append((tmp_path / name / "particles.csv").read_bytes())
        assert outs[0] == outs[1] != outs[2]

    def test_workers_flag_byte_identical(self, tmp_path):
        path = write_config(tmp_path, MINIMAL)
        files = {}
        for w in ("1", "4", "0"):
            assert main(["--config", str(path), "--workers", w, "--output-dir", str(tmp_path / w), "--quiet"]) == 0
            files[w] = [(tmp_path / w / f).read_bytes() for f in ("particles.csv", "reward_history.csv")]
        assert files["1"] == files["4"] == files["0"]

    def test_negative_workers(self, tmp_path):
        assert main(["--config", str(write_config(tmp_path, MINIMAL)), "--workers", "-1"]) == 1
