"""Full-covariance Gaussian mixtures fitted by EM, with BIC model selection."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit

logger = logging.getLogger(__name__)

_LOG_2PI = float(np.log(2 * np.pi))


@dataclass(frozen=True)
class EmConfig:
    """EM settings.

    ``reg_floor`` is relative: the covariance floor added at every M-step is
    ``reg_floor * trace(pooled covariance) / d``.
    """

    n_init: int = 5
    max_iter: int = 200
    rel_tol: float = 1e-6
    reg_floor: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if not self.reg_floor > 0:
            raise ValueError("reg_floor must be positive")


# -- compiled kernels -------------------------------------------------------


@njit(cache=True)
def _cholesky(A, L):
    # lower Cholesky factor of a small SPD matrix written into L; False if not PD
    d = A.shape[0]
    for a in range(d):
        for b in range(a + 1):
            s = A[a, b]
            for c in range(b):
                s -= L[a, c] * L[b, c]
            if a == b:
                if not s > 0.0:
                    return False
                L[a, a] = np.sqrt(s)
            else:
                L[a, b] = s / L[b, b]
        for b in range(a + 1, d):
            L[a, b] = 0.0
    return True


@njit(cache=True)
def _log_densities(X, weights, means, covs):
    # log p_k + log N(x_i; m_k, S_k), shape (N, K)
    n, d = X.shape
    K = weights.shape[0]
    out = np.empty((n, K))
    L = np.empty((d, d))
    y = np.empty(d)
    for k in range(K):
        if weights[k] <= 0.0 or not _cholesky(covs[k], L):
            out[:, k] = -np.inf
            continue
        logdet = 0.0
        for a in range(d):
            logdet += 2.0 * np.log(L[a, a])
        const = np.log(weights[k]) - 0.5 * (d * _LOG_2PI + logdet)
        for i in range(n):
            acc = 0.0
            for a in range(d):
                s = X[i, a] - means[k, a]
                for b in range(a):
                    s -= L[a, b] * y[b]
                y[a] = s / L[a, a]
                acc += y[a] * y[a]
            out[i, k] = const - 0.5 * acc
    return out


@njit(cache=True)
def _logsumexp_rows(a):
    n, K = a.shape
    out = np.empty(n)
    for i in range(n):
        top = -np.inf
        for k in range(K):
            if a[i, k] > top:
                top = a[i, k]
        if not np.isfinite(top):
            out[i] = top
            continue
        s = 0.0
        for k in range(K):
            s += np.exp(a[i, k] - top)
        out[i] = top + np.log(s)
    return out


@njit(cache=True)
def _moments(X, logp, norm):
    # responsibility-weighted counts, means and covariances
    n, d = X.shape
    K = logp.shape[1]
    nk = np.zeros(K)
    means = np.zeros((K, d))
    covs = np.zeros((K, d, d))
    r = np.empty(n)
    for k in range(K):
        for i in range(n):
            r[i] = np.exp(logp[i, k] - norm[i])
            nk[k] += r[i]
            for a in range(d):
                means[k, a] += r[i] * X[i, a]
        denom = max(nk[k], 1e-300)
        for a in range(d):
            means[k, a] /= denom
        for i in range(n):
            for a in range(d):
                da = X[i, a] - means[k, a]
                for b in range(a + 1):
                    covs[k, a, b] += r[i] * da * (X[i, b] - means[k, b])
        for a in range(d):
            for b in range(a + 1):
                covs[k, a, b] /= denom
                covs[k, b, a] = covs[k, a, b]
    return nk, means, covs


@njit(cache=True)
def _em_segment(X, weights, means, covs, floor, budget, rel_tol, watch_collapse):
    """EM iterations until convergence, ``budget`` M-steps, or a collapse.

    A component collapses when its weight drops below 1/(10 N) or its
    unregularized covariance has an eigenvalue below ``floor`` (tested by
    factoring ``S - floor I``). Only checked when ``watch_collapse`` is set.
    """
    n, d = X.shape
    K = weights.shape[0]
    history = np.empty(budget + 1)
    collapsed = np.zeros(K, dtype=np.bool_)
    L = np.empty((d, d))
    shifted = np.empty((d, d))
    h = 0
    it = 0
    prev = 0.0
    converged = False
    while True:
        logp = _log_densities(X, weights, means, covs)
        norm = _logsumexp_rows(logp)
        ll = norm.sum()
        history[h] = ll
        h += 1
        if h > 1 and abs(ll - prev) <= rel_tol * abs(prev):
            converged = True
            break
        if it >= budget:
            break
        prev = ll
        nk, means, covs = _moments(X, logp, norm)
        weights = nk / n
        any_collapsed = False
        for k in range(K):
            if watch_collapse:
                shifted[:, :] = covs[k]
                for a in range(d):
                    shifted[a, a] -= floor
                collapsed[k] = weights[k] < 1.0 / (10.0 * n) or not _cholesky(shifted, L)
                any_collapsed = any_collapsed or collapsed[k]
            for a in range(d):
                covs[k, a, a] += floor
        it += 1
        if any_collapsed:
            break
    return weights, means, covs, history[:h], it, converged, collapsed, logp, norm


# -- public API -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaussianMixture:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    covariances: np.ndarray  # (K, d, d)

    @property
    def n_components(self) -> int:
        return self.weights.size

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def weighted_log_densities(self, X: np.ndarray) -> np.ndarray:
        """log(p_k) + log f_k(x) for every row of ``X``, shape (N, K)."""
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        if X.shape[1] != self.dim:
            raise ValueError(f"points have dimension {X.shape[1]}, mixture has {self.dim}")
        return _log_densities(X, self.weights, self.means, self.covariances)

    def loglik(self, X: np.ndarray) -> float:
        return float(_logsumexp_rows(self.weighted_log_densities(X)).sum())


@dataclass
class EmFit:
    """Outcome of :func:`fit_em`.

    ``history`` lists the log-likelihood after each E-step of the winning run;
    ``segments`` holds the indices in ``history`` where a run (re)started, since
    reinitializing a collapsed component is allowed to lower the likelihood.
    """

    model: GaussianMixture
    loglik: float
    responsibilities: np.ndarray
    history: list = field(default_factory=list)
    segments: list = field(default_factory=lambda: [0])
    n_iter: int = 0
    converged: bool = True
    reinitialized: bool = False
    run: int = 0


def _floor(X: np.ndarray, config: EmConfig) -> float:
    d = X.shape[1]
    pooled = np.cov(X, rowvar=False, bias=True).reshape(d, d)
    tr = float(np.trace(pooled))
    return config.reg_floor * tr / d if tr > 0 else config.reg_floor


def _single_gaussian(X: np.ndarray, floor: float) -> EmFit:
    n, d = X.shape
    mean = X.mean(axis=0)
    D = X - mean
    cov = (D.T @ D) / n
    if np.linalg.eigvalsh(cov)[0] < floor:
        cov = cov + floor * np.eye(d)
    model = GaussianMixture(np.ones(1), mean[None, :], cov[None, :, :])
    ll = model.loglik(X)
    return EmFit(model, ll, np.ones((n, 1)), history=[ll], n_iter=0)


def _kmeanspp(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = [X[rng.integers(n)]]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, np.sum((X - X[idx]) ** 2, axis=1))
    return np.array(centers)


def _em_run(X, K, config, floor, pooled, rng, run):
    weights = np.full(K, 1.0 / K)
    means = _kmeanspp(X, K, rng)
    covs = np.repeat(pooled[None, :, :], K, axis=0)
    history, segments = [], [0]
    reinitialized, it = False, 0
    while True:
        weights, means, covs, hist, n_it, converged, collapsed, logp, norm = _em_segment(
            X, weights, means, covs, floor, config.max_iter - it, config.rel_tol, not reinitialized
        )
        history.extend(hist.tolist())
        it += n_it
        if reinitialized or not collapsed.any():
            break
        # move each collapsed component onto the worst-explained point, once
        reinitialized = True
        worst = np.argsort(norm, kind="stable")
        for rank, k in enumerate(np.flatnonzero(collapsed)):
            means[k] = X[worst[rank]]
            covs[k] = pooled
            weights[k] = 1.0 / K
        weights = weights / weights.sum()
        segments.append(len(history))
    resp = np.exp(logp - norm[:, None])
    model = GaussianMixture(weights, means, covs)
    return EmFit(model, history[-1], resp, history, segments, it, bool(converged), reinitialized, run)


def fit_em(X: np.ndarray, K: int, config: EmConfig = EmConfig()) -> EmFit:
    """Fit a K-component full-covariance Gaussian mixture to the rows of ``X``.

    ``K = 1`` is solved in closed form (sample mean, covariance with
    denominator N). Otherwise the best of ``config.n_init`` EM runs, by final
    log-likelihood, is returned; run ``r`` is seeded from ``(config.seed, K, r)``.
    """
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    if X.ndim != 2:
        raise ValueError("points must be a 2-D array")
    n, d = X.shape
    if K < 1:
        raise ValueError("K must be >= 1")
    if n < K:
        raise ValueError(f"cannot fit {K} components to {n} points")
    floor = _floor(X, config)
    if K == 1:
        return _single_gaussian(X, floor)
    pooled = np.cov(X, rowvar=False, bias=True).reshape(d, d) + floor * np.eye(d)
    best = None
    for run in range(config.n_init):
        rng = np.random.default_rng([config.seed, K, run])
        fit = _em_run(X, K, config, floor, pooled, rng, run)
        if best is None or fit.loglik > best.loglik:
            best = fit
    return best


def n_parameters(K: int, d: int) -> int:
    """Free parameters of a K-component, d-dimensional full-covariance mixture."""
    return K + K * d + K * d * (d + 1) // 2 - 1


def bic(loglik: float, K: int, d: int, n: int) -> float:
    """``2 log L - kappa log n``; larger is better."""
    if n < 1:
        raise ValueError("sample size must be >= 1")
    return 2.0 * loglik - n_parameters(K, d) * np.log(n)


@dataclass
class Selection:
    k_hat: int
    fits: dict  # K -> EmFit
    bics: dict  # K -> BIC
    failures: dict = field(default_factory=dict)  # K -> error message


def select_k(X: np.ndarray, k_max: int, config: EmConfig = EmConfig()) -> Selection:
    """Fit K = 1..min(k_max, N) mixtures and pick the BIC maximizer.

    Ties go to the smaller K. A K whose fit raises is skipped and recorded in
    ``failures``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, d = X.shape
    if n < 2:
        raise ValueError("model selection needs at least 2 points")
    fits, bics, failures = {}, {}, {}
    for K in range(1, min(k_max, n) + 1):
        try:
            fit = fit_em(X, K, config)
        except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
            logger.warning("GMM fit with K=%d failed: %s", K, exc)
            failures[K] = str(exc)
            continue
        fits[K] = fit
        bics[K] = bic(fit.loglik, K, d, n)
    if not bics:
        raise RuntimeError("no mixture could be fitted")
    k_hat = max(sorted(bics), key=lambda k: (bics[k], -k))
    return Selection(k_hat, fits, bics, failures)


def posterior(model: GaussianMixture, X: np.ndarray) -> np.ndarray:
    """Posterior component probabilities for each row of ``X``, shape (N, K).

    Computed in log space. Rows where every density is non-finite are given
    to the nearest component by Mahalanobis distance.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    logp = model.weighted_log_densities(X)
    with np.errstate(invalid="ignore"):
        norm = _logsumexp_rows(logp)
        out = np.exp(logp - norm[:, None])
    bad = ~np.isfinite(norm) | ~np.all(np.isfinite(out), axis=1)
    if np.any(bad):
        logger.warning("posterior underflow for %d point(s); using nearest component", bad.sum())
        inv = np.linalg.inv(model.covariances)
        diff = X[bad][None, :, :] - model.means[:, None, :]
        maha = np.einsum("kni,kij,knj->nk", diff, inv, diff)
        out[bad] = 0.0
        out[np.flatnonzero(bad), np.nanargmin(maha, axis=1)] = 1.0
    return out
