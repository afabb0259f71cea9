import numpy as np
import pytest

from fcubt.fdata import GridMismatchError, MultiFunData, SamplingGrid, UnivariateSample, gram
from fcubt.mfpca import (
    fit_mfpca,
    project,
    reconstruct,
    theoretical_score_moments,
    truncation_error,
    univariate_scores,
)
from fcubt.simulate import HIGH_VARIANCES, LOW_VARIANCES, scenario1, scenario1_components, scenario2, wiener_basis
from fcubt.smoothing import estimate_covariance, estimate_mean, smooth_sample
from fcubt.ufpca import compute_scores, fit_ufpca


@pytest.fixture(scope="module")
def s1():
    return scenario1(1000, seed=21)


@pytest.fixture(scope="module")
def s2_smooth():
    return smooth_sample(scenario2(300, seed=4).data)


def _mean_sq_norm(resid, grids):
    return float(np.mean(np.diag(gram(resid, resid, grids))))


def test_single_component_reduces_to_univariate(s1):
    comp = s1.data.components[0]
    mean = estimate_mean(comp)
    uni = fit_ufpca(estimate_covariance(comp, mean, smooth_diagonal=False), mean, comp.grid, 0.99)
    model = fit_mfpca(s1.data, 0.99, smooth_diagonal=False)
    n = s1.data.n_obs
    # without diagonal correction the univariate score covariance is diag(lambda) * N / (N - 1)
    np.testing.assert_allclose(model.eigenvalues, uni.eigenvalues * n / (n - 1), rtol=1e-8)
    np.testing.assert_allclose(np.abs(model.eigenvectors), np.eye(uni.n_components), atol=1e-6)
    np.testing.assert_allclose(np.abs(project(model, s1.data)), np.abs(compute_scores(comp, uni)), atol=1e-6)


def test_duplicated_component_doubles_eigenvalues(s1):
    comp = s1.data.components[0]
    data = MultiFunData((comp, comp))
    single = fit_mfpca(s1.data, 3)
    double = fit_mfpca(data, 3)
    np.testing.assert_allclose(double.eigenvalues, 2 * single.eigenvalues, rtol=1e-8)
    for j in range(3):
        a, b = double.eigenfunctions[0][j], double.eigenfunctions[1][j]
        np.testing.assert_allclose(a, b, atol=1e-8)
        # each half carries 1/sqrt(2) of the univariate eigenfunction
        np.testing.assert_allclose(np.abs(a) * np.sqrt(2), np.abs(single.eigenfunctions[0][j]), atol=1e-6)


def test_scenario2_truncation_range():
    for seed in range(3):
        data = smooth_sample(scenario2(200, seed=seed).data)
        model = fit_mfpca(data, 0.95)
        assert 2 <= model.n_kept <= 10
        assert model.explained_variance >= 0.95 - 1e-12
        assert model.n_kept <= model.n_total


def test_eigenfunctions_orthonormal(s2_smooth):
    model = fit_mfpca(s2_smooth, 0.99)
    G = gram(model.eigenfunctions, model.eigenfunctions, model.grids)
    np.testing.assert_allclose(G, np.eye(model.n_kept), atol=1e-4)
    assert np.all(np.diff(model.eigenvalues) <= 0) and np.all(model.eigenvalues >= 0)


def test_projection_examples(s2_smooth):
    model = fit_mfpca(s2_smooth, 0.95)
    grids = model.grids
    means = MultiFunData.from_arrays(grids, [m[None, :] for m in model.means])
    np.testing.assert_allclose(project(model, means), 0.0, atol=1e-12)
    shifted = MultiFunData.from_arrays(grids, [(m + f[0])[None, :] for m, f in zip(model.means, model.eigenfunctions)])
    expected = np.zeros(model.n_kept)
    expected[0] = 1.0
    np.testing.assert_allclose(project(model, shifted)[0], expected, atol=1e-3)


def test_projection_equals_direct_inner_products(s2_smooth):
    model = fit_mfpca(s2_smooth, 0.95)
    centered = [v - m for v, m in zip(s2_smooth.values, model.means)]
    direct = gram(centered, model.eigenfunctions, model.grids)
    np.testing.assert_allclose(project(model, s2_smooth), direct, atol=1e-10)


def test_score_covariance_is_diagonal(s2_smooth):
    model = fit_mfpca(s2_smooth, 0.95)
    scores = project(model, s2_smooth)
    S = scores.T @ scores / (scores.shape[0] - 1)
    lam1 = model.eigenvalues[0]
    off = S - np.diag(np.diag(S))
    assert np.max(np.abs(off)) <= 1e-6 * lam1
    np.testing.assert_allclose(np.diag(S), model.eigenvalues, atol=1e-8 * lam1)


def test_project_grid_mismatch(s1):
    model = fit_mfpca(s1.data, 2)
    other = MultiFunData.from_arrays([np.linspace(0, 2, 101)], [s1.data.values[0][:3]])
    with pytest.raises(GridMismatchError):
        project(model, other)


def test_reconstruct_zero_scores(s1):
    model = fit_mfpca(s1.data, 3)
    rec = reconstruct(model, np.zeros((4, 3)))
    np.testing.assert_allclose(rec.values[0], np.tile(model.means[0], (4, 1)), atol=0)
    with pytest.raises(ValueError):
        reconstruct(model, np.zeros((1, 4)))


def test_round_trip_error_nonincreasing(s1):
    model = fit_mfpca(s1.data, 1.0)
    errs = [truncation_error(model, s1.data, J) for J in range(1, model.n_kept + 1)]
    assert np.all(np.diff(errs) <= 1e-10)


def test_low_rank_data_is_recovered():
    rng = np.random.default_rng(0)
    grids = [SamplingGrid.uniform(51), SamplingGrid.uniform(31, 0, 2)]
    basis1 = np.vstack([np.sin((k + 1) * np.pi * grids[0].points) for k in range(3)])
    basis2 = np.vstack([np.cos((k + 1) * grids[1].points) for k in range(3)])
    coef = rng.normal(size=(200, 3)) * [3.0, 2.0, 1.0]
    data = MultiFunData.from_arrays(grids, [coef @ basis1, coef @ basis2 + 1.0])
    model = fit_mfpca(data, 3, smooth_diagonal=False)
    assert truncation_error(model, data, 3) < 1e-6


def test_lemma3_mfpca_beats_random_rotations(s2_smooth):
    model = fit_mfpca(s2_smooth, 1.0)
    rng = np.random.default_rng(99)
    centered = [v - m for v, m in zip(s2_smooth.values, model.means)]
    J_plus = model.n_kept
    for J in (1, 2, 3):
        best = truncation_error(model, s2_smooth, J)
        for _ in range(20):
            Q, _ = np.linalg.qr(rng.normal(size=(J_plus, J_plus)))
            psi = [Q.T @ f for f in model.eigenfunctions]
            sc = gram(centered, psi, model.grids)[:, :J]
            resid = [c - sc @ p[:J] for c, p in zip(centered, psi)]
            assert best <= _mean_sq_norm(resid, model.grids) + 1e-10


def test_identical_curves_are_degenerate():
    f = np.sin(np.linspace(0, 3, 21))
    data = MultiFunData.from_arrays([np.linspace(0, 1, 21)], [np.tile(f, (20, 1))])
    model = fit_mfpca(data)
    assert model.degenerate
    assert model.n_kept == 1 and model.eigenvalues[0] == 0.0


def test_fixed_one_component(s2_smooth):
    assert fit_mfpca(s2_smooth, 1).n_kept == 1


def test_needs_two_curves():
    data = MultiFunData.from_arrays([np.linspace(0, 1, 5)], [np.ones((1, 5))])
    with pytest.raises(ValueError):
        fit_mfpca(data)


# -- score moments of Gaussian functional mixtures ----------------------------

GRID = SamplingGrid.uniform(101)
WIENER = [[wiener_basis(k, GRID)] for k in (1, 2, 3)]


def _scenario1_spec():
    comps = scenario1_components(GRID.points)
    means = [[comps[k][0]] for k in range(1, 6)]
    variances = np.array([comps[k][1] for k in range(1, 6)])
    return means, variances


def test_same_basis_gives_generator_variances():
    means, variances = _scenario1_spec()
    out = theoretical_score_moments([0.2] * 5, means, variances, WIENER, WIENER, [GRID])
    np.testing.assert_allclose(out["variances"], variances, rtol=1e-4)
    for k in range(5):
        off = out["covariances"][k] - np.diag(np.diag(out["covariances"][k]))
        assert np.max(np.abs(off)) < 1e-4 * variances[k].max()


def test_equal_means_give_zero_score_means():
    mu = [np.exp(GRID.points)]
    out = theoretical_score_moments([0.5, 0.5], [mu, mu], np.ones((2, 3)), WIENER, WIENER, [GRID])
    np.testing.assert_allclose(out["means"], 0.0, atol=1e-12)


def test_cluster1_variances_match_generator():
    means, variances = _scenario1_spec()
    out = theoretical_score_moments([0.2] * 5, means, variances, WIENER, WIENER, [GRID])
    np.testing.assert_allclose(out["variances"][0], [16, 64 / 9, 16 / 9], rtol=1e-4)
    assert tuple(variances[0]) == HIGH_VARIANCES and tuple(variances[1]) == LOW_VARIANCES


def test_moments_grid_mismatch():
    with pytest.raises(GridMismatchError):
        theoretical_score_moments([1.0], [[np.zeros(101)]], np.ones((1, 3)), WIENER, WIENER, [GRID, GRID])


def test_simulated_scores_match_theoretical_moments(s1):
    # scores on the estimated eigenfunctions are Gaussian within each cluster,
    # with moments given by the generating mixture
    model = fit_mfpca(s1.data, 3)
    scores = project(model, s1.data)
    means, variances = _scenario1_spec()
    targets = [[f] for f in model.eigenfunctions[0]]
    th = theoretical_score_moments(
        [0.2] * 5, means, variances, WIENER, targets, [GRID], overall_mean=list(model.means)
    )
    for k in range(5):
        sc = scores[s1.true_labels == k + 1]
        n = sc.shape[0]
        tau2 = th["variances"][k]
        se_mean = np.sqrt(tau2 / n)
        se_var = tau2 * np.sqrt(2.0 / (n - 1))
        assert np.all(np.abs(sc.mean(axis=0) - th["means"][k]) <= 4 * se_mean)
        assert np.all(np.abs(sc.var(axis=0, ddof=1) - tau2) <= 4 * se_var)


def test_univariate_scores_shape(s2_smooth):
    model = fit_mfpca(s2_smooth, 0.95)
    assert univariate_scores(model, s2_smooth).shape == (s2_smooth.n_obs, model.n_total)
