import numpy as np
import pytest

from rparvi.baseline_mh import MhConfig, accept_probability, mh_run, mh_run_trace, mh_step
from rparvi.core import RandomStream, StreamPurpose, ValidationError, uniform_box
from rparvi.engine import DensityError
from rparvi.target import CallableTarget, GaussianTarget


def test_accept_probability():
    assert accept_probability(1.0, 2.0) == 1.0
    assert accept_probability(1.0, 0.5) == 0.5
    assert accept_probability(1.0, 0.0) == 0.0
    assert accept_probability(0.0, 0.3) == 1.0
    assert accept_probability(0.7, 0.7) == 1.0


def test_zero_density_proposal_never_accepted():
    # density 1 on the negative half-line, 0 elsewhere; start deep inside
    target = CallableTarget(lambda p: (p[:, 0] < 0).astype(float), 1, vectorized=True)
    x = np.array([-0.01])
    for step in range(1, 300):
        y = mh_step(x, target, 1.0, RandomStream(3, 0, step, purpose=StreamPurpose.MH_STEP))
        assert y[0] < 0
        x = y


def test_equal_density_always_accepted():
    flat = CallableTarget(lambda p: np.full(len(p), 0.25), 2, vectorized=True)
    x = np.array([0.1, 0.2])
    for step in range(1, 50):
        y = mh_step(x, flat, 0.3, RandomStream(0, 0, step, purpose=StreamPurpose.MH_STEP))
        assert not np.array_equal(x, y)
        x = y


def test_mh_step_matches_run():
    cfg = MhConfig(num_chains=4, steps=30, proposal_std=0.8, bound=3.0, seed=21)
    target = GaussianTarget([0.0, 1.0])
    x = uniform_box(21, StreamPurpose.MH_INIT, np.arange(4), 2, 3.0)
    for step in range(1, 31):
        x = np.array([
            mh_step(x[c], target, 0.8, RandomStream(21, c, step, purpose=StreamPurpose.MH_STEP))
            for c in range(4)
        ])
    np.testing.assert_array_equal(mh_run(cfg, target), x)


def test_gaussian_moments():
    cfg = MhConfig(num_chains=256, steps=5000, proposal_std=1.0, bound=5.0, burn_in=1000, seed=0)
    samples = mh_run(cfg, GaussianTarget([0.0]))
    assert samples.shape == (256, 1)
    assert abs(samples.mean()) <= 0.2
    assert 0.85 <= samples.std(ddof=1) <= 1.15


def test_deterministic_and_worker_invariant():
    cfg = MhConfig(num_chains=37, steps=300, proposal_std=0.5, bound=2.0, seed=5)
    target = GaussianTarget([1.0, -1.0])
    a = mh_run(cfg, target)
    assert a.tobytes() == mh_run(cfg, target).tobytes()
    assert a.tobytes() == mh_run(cfg, target, workers=4).tobytes()


def test_trace_shape_and_final():
    cfg = MhConfig(num_chains=5, steps=100, proposal_std=0.5, bound=2.0, burn_in=40, seed=1)
    target = GaussianTarget([0.0])
    final, trace = mh_run_trace(cfg, target, thin=10)
    assert trace.shape == (5, 6, 1)
    np.testing.assert_array_equal(trace[:, -1, :], final)
    np.testing.assert_array_equal(final, mh_run(cfg, target))


def test_detailed_balance_three_cells():
    """Long-run cell frequencies on a piecewise-constant 3-cell target."""
    heights = np.array([1.0, 2.0, 3.0])
    edges = np.array([-1.5, -0.5, 0.5, 1.5])

    def density(p):
        cell = np.searchsorted(edges, p[:, 0], side="right") - 1
        inside = (cell >= 0) & (cell < 3)
        return np.where(inside, heights[np.clip(cell, 0, 2)], 0.0)

    expected = heights / heights.sum()  # brute-force normalization over the grid cells (equal widths)
    cfg = MhConfig(num_chains=3000, steps=150, proposal_std=1.0, bound=1.5, seed=8)
    samples = mh_run(cfg, CallableTarget(density, 1, vectorized=True))
    cells = np.searchsorted(edges, samples[:, 0], side="right") - 1
    freq = np.bincount(cells, minlength=3)[:3] / len(cells)
    stderr = np.sqrt(expected * (1 - expected) / len(cells))
    assert np.all(np.abs(freq - expected) <= 3 * stderr), (freq, expected)


@pytest.mark.parametrize(
    "kwargs, key",
    [
        ({"burn_in": 10}, "burn_in"),
        ({"num_chains": 0}, "num_chains"),
        ({"proposal_std": 0.0}, "proposal_std"),
        ({"seed": -1}, "seed"),
    ],
)
def test_config_validation(kwargs, key):
    base = dict(num_chains=2, steps=10, proposal_std=1.0, bound=1.0)
    base.update(kwargs)
    with pytest.raises(ValidationError) as err:
        MhConfig(**base)
    assert err.value.key == key


def test_from_mapping_unknown_key():
    with pytest.raises(ValidationError, match="unknown key: thin"):
        MhConfig.from_mapping({"num_chains": 2, "steps": 3, "proposal_std": 1.0, "thin": 2}, bound=1.0)


def test_nonfinite_density_aborts():
    bad = CallableTarget(lambda p: np.where(p[:, 0] > 0.5, np.inf, 1.0), 1, vectorized=True)
    with pytest.raises(DensityError):
        mh_run(MhConfig(num_chains=8, steps=200, proposal_std=1.0, bound=1.0), bad)
