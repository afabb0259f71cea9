import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fcubt.fdata import MultiFunData, RawCurve, SamplingGrid, UnivariateSample
from fcubt.simulate import default_grid, scenario1, scenario1_components
from fcubt.smoothing import (
    SmootherConfig,
    estimate_covariance,
    estimate_mean,
    interpolate_curves,
    min_points,
    rule_of_thumb_bandwidth,
    smooth_component,
    smooth_curve,
    smooth_curves,
    smooth_sample,
    smoother_matrix,
)

T = np.linspace(0, 1, 101)
GRID = SamplingGrid(T)


def test_config_validation():
    with pytest.raises(ValueError):
        SmootherConfig(GRID, degree=3)
    with pytest.raises(ValueError):
        SmootherConfig(GRID, bandwidth=0.0)
    with pytest.raises(ValueError):
        SmootherConfig(GRID, bandwidth="silverman")
    with pytest.raises(ValueError):
        SmootherConfig(GRID, kernel="box")


def test_min_points():
    assert min_points(0) == 5 and min_points(2) == 5


def test_rule_of_thumb():
    assert rule_of_thumb_bandwidth(T) == pytest.approx(101 ** -0.2)


@pytest.mark.parametrize("bandwidth", ["auto", 0.05, 0.3])
def test_local_linear_reproduces_lines(bandwidth):
    out = smooth_curve(T, 2 * T + 1, SmootherConfig(GRID, 1, bandwidth))
    np.testing.assert_allclose(out, 2 * T + 1, atol=1e-8)


@pytest.mark.parametrize("degree", [0, 1, 2])
@pytest.mark.parametrize("kernel", ["epanechnikov", "gaussian"])
def test_constants_reproduced(degree, kernel):
    out = smooth_curve(T, np.full(101, 3.0), SmootherConfig(GRID, degree, 0.1, kernel))
    np.testing.assert_allclose(out, 3.0, rtol=0, atol=1e-12)


def test_quadratic_reproduced_by_degree_two():
    t = np.sort(np.random.default_rng(0).uniform(0, 1, 60))
    y = 1 - 3 * t + 4 * t**2
    out = smooth_curve(t, y, SmootherConfig(GRID, 2, 0.15))
    np.testing.assert_allclose(out, 1 - 3 * T + 4 * T**2, atol=1e-8)


def test_sine_recovery_with_auto_bandwidth():
    truth = np.sin(2 * np.pi * T)
    cfg = SmootherConfig(GRID)
    rmse = []
    for seed in range(100):
        y = truth + np.random.default_rng(seed).normal(0, 0.05, T.size)
        rmse.append(np.sqrt(np.mean((smooth_curve(T, y, cfg) - truth) ** 2)))
    assert max(rmse) < 0.05


def test_sparse_window_falls_back():
    # two tight clumps leave the middle of the output grid without observations
    t = np.array([0.0, 0.01, 0.02, 0.03, 0.97, 0.98, 0.99, 1.0])
    y = 5 * t - 1
    S = smoother_matrix(t, T, 0.02, 1)
    assert np.all(np.isfinite(S))
    np.testing.assert_allclose(S @ y, 5 * T - 1, atol=1e-8)


def test_identical_times_fall_back_to_neighbours():
    S = smoother_matrix(np.array([0.0, 1e-14, 2e-14, 1.0, 2.0]), np.array([0.5]), 1e-15, 1)
    assert np.all(np.isfinite(S))


def test_too_few_points():
    with pytest.raises(ValueError):
        smooth_curve([0.0, 1.0], [1.0, 2.0], SmootherConfig(GRID, 1))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 1000), st.floats(-10, 10).filter(lambda a: abs(a) > 1e-3), st.floats(-10, 10))
def test_smoothing_is_affine_equivariant(seed, a, b):
    rng = np.random.default_rng(seed)
    t = np.sort(rng.uniform(0, 1, 40)) + np.arange(40) * 1e-9
    y = np.cos(3 * t) + rng.normal(0, 0.2, 40)
    cfg = SmootherConfig(GRID, 1, 0.12)
    lhs = smooth_curve(t, a * y + b, cfg)
    rhs = a * smooth_curve(t, y, cfg) + b
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(a) + abs(b)))


def test_smooth_component_groups_shared_times():
    rng = np.random.default_rng(1)
    Y = np.sin(T)[None, :] + rng.normal(0, 0.1, (5, 101))
    cfg = SmootherConfig(GRID, 1, 0.1)
    out = smooth_component([T] * 5, list(Y), cfg)
    for i in range(5):
        np.testing.assert_allclose(out.values[i], smooth_curve(T, Y[i], cfg), atol=1e-12)


def test_smooth_curves_irregular_designs():
    rng = np.random.default_rng(2)
    curves = []
    for _ in range(4):
        t1 = np.sort(rng.uniform(0, 1, 30))
        t2 = np.sort(rng.uniform(0, 2, 25))
        curves.append(RawCurve((t1, t2), (3 * t1, 1 - t2)))
    grids = [SamplingGrid.uniform(21), SamplingGrid.uniform(11, 0, 2)]
    data = smooth_curves(curves, grids, bandwidth=0.3)
    assert data.n_obs == 4 and data.same_grids(grids)
    np.testing.assert_allclose(data.values[1], np.tile(1 - grids[1].points, (4, 1)), atol=1e-8)


def test_smooth_sample_keeps_grid():
    data = MultiFunData.from_arrays([T], [np.tile(2 * T, (3, 1))])
    out = smooth_sample(data)
    assert out.same_grids(data.grids)
    np.testing.assert_allclose(out.values[0], data.values[0], atol=1e-8)


def test_interpolation_path():
    curves = [RawCurve(([0.0, 1.0],), ([0.0, 2.0],))]
    out = interpolate_curves(curves, [SamplingGrid([0.0, 0.25, 1.0])])
    np.testing.assert_allclose(out.values[0], [[0.0, 0.5, 2.0]])


def test_mean_examples():
    f = np.sin(T)
    assert np.array_equal(estimate_mean(UnivariateSample(GRID, np.vstack([f, -f]))), np.zeros(101))
    assert np.array_equal(estimate_mean(UnivariateSample(GRID, f[None, :])), f)


def test_mean_of_scenario1_within_band():
    s = scenario1(500, seed=11)
    X = s.data.values[0]
    mix = sum(0.2 * mean for mean, _ in scenario1_components(default_grid().points).values())
    se = X.std(axis=0, ddof=1) / np.sqrt(X.shape[0])
    assert np.all(np.abs(estimate_mean(s.data.components[0]) - mix) <= 3 * se + 1e-12)


def test_covariance_of_identical_curves_is_zero():
    f = np.cos(5 * T) + 3
    sample = UnivariateSample(GRID, np.tile(f, (7, 1)))
    cov = estimate_covariance(sample, estimate_mean(sample))
    assert np.max(np.abs(cov)) < 1e-12


def test_covariance_of_brownian_paths():
    rng = np.random.default_rng(7)
    dt = np.diff(T)
    W = np.hstack([np.zeros((1000, 1)), np.cumsum(rng.normal(size=(1000, 100)) * np.sqrt(dt), axis=1)])
    cov = estimate_covariance(UnivariateSample(GRID, W))
    s, t = np.meshgrid(T, T, indexing="ij")
    off_band = np.abs(s - t) > 0.05
    assert np.max(np.abs(cov - np.minimum(s, t))[off_band]) < 0.15


def test_rank_one_covariance():
    rng = np.random.default_rng(8)
    phi = np.sqrt(2) * np.sin(np.pi * T)
    X = rng.normal(size=(1000, 1)) * phi[None, :]
    cov = estimate_covariance(UnivariateSample(GRID, X))
    target = np.outer(phi, phi)
    assert np.linalg.norm(cov - target) / np.linalg.norm(target) < 0.1


def test_covariance_symmetric_and_diagonal_debiased():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(400, 1)) * np.ones(101) + rng.normal(0, 1.0, (400, 101))
    raw = estimate_covariance(UnivariateSample(GRID, X), smooth_diagonal=False)
    fixed = estimate_covariance(UnivariateSample(GRID, X))
    assert np.array_equal(fixed, fixed.T)
    # white noise inflates the raw diagonal by ~1; the extrapolated one stays near the true 1
    assert np.mean(np.diag(raw)) > 1.7
    assert abs(np.mean(np.diag(fixed)) - 1.0) < 0.2


def test_covariance_needs_two_curves():
    with pytest.raises(ValueError):
        estimate_covariance(UnivariateSample(GRID, np.ones((1, 101))))
