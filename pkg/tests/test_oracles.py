"""
Test oracles
============
Lyapunov exponents, finite differences, observable means, the
two-initialization convergence check and the conventional tangent blow-up.
The long S3-vs-FD agreement checks are marked slow.
"""

import sys
import time
from pathlib import Path

import numpy as np
import pytest

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

try:
    from space_split.src.baker_map import BakerMap
    from space_split.src.observables import CONSTANT, COS4X2, SIN_COS_X3
    from space_split.src.oracles import (
        FdConfig,
        convergence_probe,
        fd_sensitivity,
        lyapunov_exponents,
        mean_observable,
        polyfit_sensitivity,
        tangent_growth_probe,
    )
    from space_split.src.s3core import S3Config, run
    from space_split.src.solenoid_map import SolenoidMap
except ImportError as e:
    print(f"Import Error: {e}")
    print("Ensure you are running this from the project root or have installed the package.")
    sys.exit(1)

LOG2, LOG3 = np.log(2.0), np.log(3.0)


def test_lyapunov_baker_at_zero():
    exponents = lyapunov_exponents(BakerMap(), n_steps=5_000, seed=0)
    assert exponents.shape == (1,)
    assert abs(exponents[0] - LOG2) < 1e-3


def test_lyapunov_solenoid_at_zero():
    exponents, stderr = lyapunov_exponents(
        SolenoidMap((0.0,)), n_steps=1_100, warmup=100, seed=1, n_chains=20, return_stderr=True
    )
    np.testing.assert_allclose(exponents, [LOG3, LOG2], atol=1e-3)
    assert exponents[0] > exponents[1]
    assert np.all(stderr >= 0.0)


@pytest.mark.parametrize(
    "map_system, expected", [(BakerMap(), [LOG2]), (SolenoidMap((0.0,)), [LOG3, LOG2])], ids=["baker", "solenoid"]
)
def test_lyapunov_1e5_samples_within_a_second(map_system, expected):
    # 100 lockstep chains of 1000 post-warmup steps
    start = time.perf_counter()
    exponents = lyapunov_exponents(map_system, n_steps=1_100, warmup=100, seed=0, n_chains=100)
    elapsed = time.perf_counter() - start
    np.testing.assert_allclose(exponents, expected, atol=1e-3)
    assert elapsed < 1.0


def test_lyapunov_seed_independent():
    solenoid = SolenoidMap((0.1,))
    first, err1 = lyapunov_exponents(solenoid, 2_100, seed=2, n_chains=10, return_stderr=True)
    second, err2 = lyapunov_exponents(solenoid, 2_100, seed=3, n_chains=10, return_stderr=True)
    assert np.all(np.abs(first - second) < 3.0 * np.hypot(err1, err2) + 1e-3)


def test_lyapunov_needs_samples():
    with pytest.raises(ValueError, match="warmup"):
        lyapunov_exponents(BakerMap(), n_steps=50, warmup=100)


def test_fd_zero_direction_is_exact_zero():
    baker = BakerMap((0.1, 0.1, 0.0, 0.0), (0.0, 0.0, 0.0, 0.0))
    fd = fd_sensitivity(baker, COS4X2, FdConfig(n_samples=2_000, seed=0))
    assert fd.value == 0.0
    assert fd.stderr == 0.0


def test_fd_constant_observable_is_exact_zero():
    fd = fd_sensitivity(SolenoidMap((0.05,)), CONSTANT, FdConfig(n_samples=2_000, seed=0))
    assert fd.value == 0.0


def test_fd_reversed_direction_flips_sign():
    fd = FdConfig(n_samples=5_000, seed=4, n_chains=2)
    forward = fd_sensitivity(BakerMap((0.1, 0.1, 0.0, 0.0), (1.0, 1.0, 0.0, 0.0)), COS4X2, fd)
    backward = fd_sensitivity(BakerMap((0.1, 0.1, 0.0, 0.0), (-1.0, -1.0, 0.0, 0.0)), COS4X2, fd)
    assert backward.value == -forward.value
    assert backward.mean_plus == forward.mean_minus


def test_fd_config_validation():
    with pytest.raises(ValueError, match="delta_s"):
        FdConfig(delta_s=0.0).validate()
    with pytest.raises(ValueError, match="n_samples"):
        FdConfig(n_samples=50, warmup=100).validate()


def test_mean_observable_constant():
    mean, stderr = mean_observable(BakerMap(), CONSTANT, n_samples=1_000, n_chains=3)
    assert mean == 1.0
    assert stderr == 0.0


def test_mean_observable_baker_at_zero():
    # x2 is uniformly distributed at zero parameters, so <cos 4 x2> = 0
    mean, stderr = mean_observable(BakerMap(), COS4X2, n_samples=20_000, n_chains=4, seed=5)
    assert abs(mean) < 5.0 * stderr + 1e-3


def test_convergence_probe_identical_seeds():
    cfg = S3Config(n_steps=1_000, seed=0)
    table = convergence_probe(BakerMap((0.1, 0.05, 0.1, 0.05)), COS4X2, cfg, (3, 3), n_steps=50)
    assert list(table.columns) == ["k", "delta_a", "delta_w", "delta_q", "delta_u"]
    assert len(table) == 51
    assert (table[["delta_a", "delta_w", "delta_q", "delta_u"]] == 0.0).all().all()


@pytest.mark.parametrize("params", [(0.12, 0.07, 0.15, 0.04), (0.03, 0.18, 0.09, 0.11), (0.2, 0.2, 0.0, 0.0)])
def test_convergence_probe_baker_decays(params):
    cfg = S3Config(n_steps=1_000, seed=1)
    table = convergence_probe(BakerMap(params), COS4X2, cfg, (0, 1), n_steps=300)
    assert table["delta_a"].iloc[0] > 0.0
    assert table["delta_a"].iloc[-1] < 1e-8
    assert table["delta_w"].iloc[-1] < 1e-8
    assert (table["delta_u"][table["k"] >= 300] < 1e-8).all()
    decaying = table[(table["delta_a"] > 0) & (table["k"] <= 60)]
    slope = np.polyfit(decaying["k"], np.log10(decaying["delta_a"]), 1)[0]
    assert slope < -0.05


@pytest.mark.parametrize("index", [0, 1, 2])
def test_convergence_probe_solenoid_decays(index):
    s = np.random.default_rng(21).uniform(0.0, 0.2, size=3)[index]
    cfg = S3Config(n_steps=1_000, seed=index)
    table = convergence_probe(SolenoidMap((s,)), SIN_COS_X3, cfg, (0, 1), n_steps=300)
    assert table["delta_a"].iloc[0] > 0.0
    assert table["delta_a"].iloc[-1] < 1e-8
    assert table["delta_w"].iloc[-1] < 1e-8
    # A transient peak is allowed; the series decays after it
    peak = int(table["delta_a"].idxmax())
    decaying = table.iloc[peak:]
    decaying = decaying[decaying["delta_a"] > 0]
    slope = np.polyfit(decaying["k"], np.log10(decaying["delta_a"]), 1)[0]
    assert slope < 0.0


@pytest.mark.parametrize(
    "map_system, observable",
    [(BakerMap((0.1, 0.1, 0.0, 0.0)), COS4X2), (SolenoidMap((0.05,)), SIN_COS_X3)],
    ids=["baker", "solenoid"],
)
def test_convergence_probe_vary_frame(map_system, observable):
    cfg = S3Config(n_steps=1_000, seed=3)
    table = convergence_probe(map_system, observable, cfg, (0, 1), n_steps=320, vary_frame=True)
    assert table["delta_q"].iloc[0] > 0.0
    assert table["delta_q"].iloc[-1] < 1e-8
    assert (table["delta_u"][table["k"] >= 300] < 1e-8).all()


def test_vary_frame_compares_columns_up_to_sign():
    # Among eight chains some frames start with opposite orientation
    cfg = S3Config(n_steps=1_000, seed=0, n_chains=8)
    table = convergence_probe(BakerMap((0.1, 0.1, 0.0, 0.0)), COS4X2, cfg, (0, 1), n_steps=300, vary_frame=True)
    assert table["delta_q"].iloc[-1] < 1e-8
    assert table["delta_w"].iloc[-1] < 1e-8


def test_tangent_growth_contrast():
    baker = BakerMap((0.1, 0.1, 0.0, 0.0), (1.0, 1.0, 0.0, 0.0))
    table = tangent_growth_probe(baker, n_steps=400, seed=0)
    assert len(table) == 401
    assert table["log10_conventional"].iloc[-1] > 60.0
    assert table["log10_regularized"].iloc[1:].max() < 3.0


def test_polyfit_sensitivity_quadratic():
    s = np.linspace(-0.2, 0.2, 9)
    slopes = polyfit_sensitivity(s, 3.0 * s ** 2 - s + 0.5, degree=2)
    np.testing.assert_allclose(slopes, 6.0 * s - 1.0, atol=1e-10)
    np.testing.assert_allclose(polyfit_sensitivity(s, s ** 3, 3, at=[0.1]), [0.03], atol=1e-10)
    with pytest.raises(ValueError, match="degree"):
        polyfit_sensitivity(s[:2], s[:2], 2)


# ----------------------------------------------------------------------
# Long agreement runs
# ----------------------------------------------------------------------
@pytest.mark.slow
@pytest.mark.parametrize("s", [0.05, 0.10, 0.15])
def test_baker_s3_matches_finite_differences(s):
    baker = BakerMap((s, s, 0.0, 0.0), (1.0, 1.0, 0.0, 0.0))
    # 1e6 S3 samples over 100 chains, 1e8 finite-difference samples over 1000 chains
    result = run(baker, COS4X2, S3Config(n_steps=10_100, warmup=100, select_k=11, seed=0, n_chains=100))
    fd = fd_sensitivity(baker, COS4X2, FdConfig(delta_s=0.01, n_samples=100_000, seed=0, n_chains=1000))
    assert abs(result.total - fd.value) <= 0.05 * abs(fd.value)


@pytest.mark.slow
@pytest.mark.parametrize("s", [-0.05, 0.05])
def test_solenoid_s3_matches_finite_differences(s):
    solenoid = SolenoidMap((s,))
    result = run(solenoid, SIN_COS_X3, S3Config(n_steps=10_100, warmup=100, select_k=11, seed=0, n_chains=1000))
    fd = fd_sensitivity(solenoid, SIN_COS_X3, FdConfig(delta_s=0.01, n_samples=100_000, seed=0, n_chains=1000))
    assert abs(result.total - fd.value) <= 0.10 * abs(fd.value)


@pytest.mark.slow
def test_lyapunov_stderr_shrinks_with_samples():
    solenoid = SolenoidMap((0.1,))
    _, short = lyapunov_exponents(solenoid, 2_600, seed=0, n_chains=10, return_stderr=True)
    _, long = lyapunov_exponents(solenoid, 10_100, seed=0, n_chains=10, return_stderr=True)
    ratio = long / short
    assert np.all((ratio > 0.3) & (ratio < 0.75))
