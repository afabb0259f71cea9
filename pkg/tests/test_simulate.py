import numpy as np
import pytest

from fcubt.fdata import SamplingGrid, inner_product
from fcubt.simulate import (
    HIGH_VARIANCES,
    LOW_VARIANCES,
    b,
    fbm,
    h1,
    h2,
    h3,
    scenario1,
    scenario1_components,
    scenario2,
    scenario3,
    simulate,
    wiener_basis,
)


def test_wiener_basis_values():
    g = SamplingGrid.uniform(101)
    phi = wiener_basis(1, g)
    assert phi[0] == 0.0
    assert phi[-1] == pytest.approx(np.sqrt(2), abs=1e-15)
    with pytest.raises(ValueError):
        wiener_basis(0, g)


def test_wiener_basis_orthogonal():
    g = SamplingGrid.uniform(1001)
    assert abs(inner_product([wiener_basis(2, g)], [wiener_basis(3, g)], [g])) < 1e-6


@pytest.fixture(scope="module")
def big_s1():
    return scenario1(5000, seed=123)


def test_scenario1_label_proportions(big_s1):
    n = big_s1.true_labels.size
    se = np.sqrt(0.2 * 0.8 / n)
    for k in range(1, 6):
        assert abs(np.mean(big_s1.true_labels == k) - 0.2) <= 4 * se


def test_scenario1_coefficient_variances(big_s1):
    grid = big_s1.data.grids[0]
    t = grid.points
    comps = scenario1_components(t)
    phi = np.vstack([wiener_basis(k, grid) for k in (1, 2, 3)])
    X = big_s1.data.values[0]
    for k, (mean, var) in comps.items():
        rows = X[big_s1.true_labels == k] - mean
        coef = (rows * grid.weights) @ phi.T
        n = coef.shape[0]
        se = np.asarray(var) * np.sqrt(2.0 / (n - 1))
        assert np.all(np.abs(coef.var(axis=0, ddof=1) - np.asarray(var)) <= 4 * se)
    assert comps[1][1] == HIGH_VARIANCES and comps[4][1] == LOW_VARIANCES


def test_scenario1_shape_and_determinism():
    a, b_ = scenario1(50, seed=9), scenario1(50, seed=9)
    assert a.data.values[0].shape == (50, 101)
    assert np.array_equal(a.data.values[0], b_.data.values[0])
    assert np.array_equal(a.true_labels, b_.true_labels)
    assert set(a.true_labels) <= {1, 2, 3, 4, 5}
    assert not np.array_equal(a.data.values[0], scenario1(50, seed=10).data.values[0])


def test_prefix_stability():
    # per-curve streams: the first curves do not depend on n
    a, c = scenario1(20, seed=4), scenario1(40, seed=4)
    assert np.array_equal(a.data.values[0], c.data.values[0][:20])


def test_scenario_size_checks():
    for f in (scenario1, scenario2, scenario3):
        with pytest.raises(ValueError):
            f(4)
    with pytest.raises(ValueError):
        simulate(4, 10)


def test_fbm_pinned_at_zero():
    paths = fbm(0.7, SamplingGrid.uniform(51), seed=0, size=10)
    assert np.all(paths[:, 0] == 0.0)
    assert fbm(0.3, np.linspace(0, 1, 11), seed=1).shape == (11,)
    with pytest.raises(ValueError):
        fbm(1.0, SamplingGrid.uniform(5))


@pytest.mark.parametrize("H", [0.2, 0.5, 0.8, 0.9])
def test_fbm_unit_variance_at_one(H):
    paths = fbm(H, SamplingGrid.uniform(51), seed=2, size=2000)
    v = paths[:, -1].var(ddof=1)
    assert abs(v - 1.0) <= 4 * np.sqrt(2.0 / 1999)


def test_brownian_increments_uncorrelated():
    paths = fbm(0.5, SamplingGrid.uniform(51), seed=3, size=2000)
    inc = np.diff(paths, axis=1)
    r = np.corrcoef(inc[:, 10], inc[:, 11])[0, 1]
    assert abs(r) <= 4 / np.sqrt(2000)


def test_fbm_covariance_matches():
    t = np.linspace(0, 1, 21)
    paths = fbm(0.8, t, seed=4, size=4000)
    emp = np.cov(paths[:, [5, 20]], rowvar=False)
    s, u = t[5], t[20]
    exact = 0.5 * (s**1.6 + u**1.6 - abs(u - s) ** 1.6)
    assert emp[0, 1] == pytest.approx(exact, abs=0.06)


def test_hat_functions():
    assert h1(np.array([0.3]))[0] == pytest.approx(1.5)
    assert h2(np.array([0.7]))[0] == pytest.approx(1.5)
    assert h3(np.array([0.5]))[0] == pytest.approx(1.5)
    assert h1(np.array([0.0, 0.6]))[1] == 0.0


def test_b_shape_and_scale():
    t = np.linspace(0, 1, 101)
    draws = np.vstack([b(0.9, t, np.random.default_rng(s)) for s in range(1000)])
    # Var b_H(t) = (1 + t)^(-2H) (1 + t)^(2H) = 1
    v = draws.var(axis=0, ddof=1)
    assert np.all(np.abs(v[[0, 50, 100]] - 1.0) <= 4 * np.sqrt(2 / 999))


def test_scenario2_layout():
    s = scenario2(30, seed=1)
    assert s.data.n_components == 2 and s.scenario_id == 2
    assert all(v.shape == (30, 101) for v in s.data.values)
    noise = s.data.values[0] - s.noiseless.values[0]
    assert 0.3 < noise.var() < 0.7


def test_cluster4_amplitude_ratio():
    s = scenario2(2000, seed=8)
    t = s.data.grids[0].points
    x = s.noiseless.values[0]
    # component 1 of clusters 2 and 4 is h2 plus 1.0 resp. 0.1 times b_0.9
    sd2 = (x[s.true_labels == 2] - h2(t)).std()
    sd4 = (x[s.true_labels == 4] - h2(t)).std()
    assert sd4 / sd2 == pytest.approx(0.1, rel=0.2)


def test_scenario3_with_zero_alpha_equals_scenario2():
    a, c = scenario2(25, seed=5), scenario3(25, seed=5, alpha=0.0)
    for u, v in zip(a.data.values, c.data.values):
        assert np.array_equal(u, v)


def test_scenario3_mixes_before_noise():
    a, c = scenario2(25, seed=6), scenario3(25, seed=6)
    np.testing.assert_allclose(c.noiseless.values[0], a.noiseless.values[0] + 0.4 * a.noiseless.values[1], atol=1e-12)
    np.testing.assert_allclose(
        c.data.values[0] - c.noiseless.values[0], a.data.values[0] - a.noiseless.values[0], atol=1e-12
    )


def test_simulate_dispatch():
    assert simulate(3, 10, 0).scenario_id == 3
