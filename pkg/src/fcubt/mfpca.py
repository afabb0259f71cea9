"""Multivariate functional PCA assembled from per-component univariate fPCA."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .fdata import (
    GridMismatchError,
    MultiFunData,
    SamplingGrid,
    UnivariateSample,
    gram,
)
from .smoothing import estimate_covariance, estimate_mean
from .ufpca import Truncation, UnivariateBasis, compute_scores, fit_ufpca, fix_signs, resolve_truncation


@dataclass(frozen=True, eq=False)
class MfpcaModel:
    """Fitted multivariate functional PCA.

    Attributes
    ----------
    means : tuple of ndarray
        Mean curve of each component.
    uni_bases : tuple of UnivariateBasis
        Univariate eigenbases; their scores are stacked into rows of length J+.
    eigenvalues : ndarray, shape (J,)
        Kept multivariate eigenvalues, nonincreasing.
    eigenvectors : ndarray, shape (J+, J)
        Columns are the eigenvectors of the univariate score covariance.
    eigenfunctions : tuple of ndarray
        Component ``p`` has shape (J, M_p).
    all_eigenvalues : ndarray
        Full spectrum of the score covariance, used for explained variance.
    """

    means: tuple
    uni_bases: tuple
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    eigenfunctions: tuple
    all_eigenvalues: np.ndarray
    degenerate: bool = False

    @property
    def grids(self) -> tuple:
        return tuple(b.grid for b in self.uni_bases)

    @property
    def n_kept(self) -> int:
        return self.eigenvalues.size

    @property
    def n_total(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def explained_variance(self) -> float:
        total = np.clip(self.all_eigenvalues, 0, None).sum()
        return float(self.eigenvalues.sum() / total) if total > 0 else 1.0


def _check_grids(model: MfpcaModel, data: MultiFunData):
    if not data.same_grids(model.grids):
        raise GridMismatchError("curves are not sampled on the model grids")


def univariate_scores(model: MfpcaModel, data: MultiFunData) -> np.ndarray:
    """Concatenated univariate scores, shape (N, J+)."""
    _check_grids(model, data)
    return np.hstack([compute_scores(c, b) for c, b in zip(data.components, model.uni_bases)])


def fit_mfpca(
    data: MultiFunData,
    truncation: Truncation = 0.95,
    smooth_diagonal: bool = True,
) -> MfpcaModel:
    """Fit a multivariate functional PCA to ``data``.

    Each component gets its own mean, covariance and univariate eigenbasis;
    the univariate scores are stacked into an N x J+ matrix whose
    cross-product ``Z'Z / (N - 1)`` is diagonalized. Multivariate
    eigenfunctions are the eigenvector-weighted sums of the univariate ones.

    ``truncation`` is either a fixed number of components or an explained
    variance ratio; it is applied to every univariate fit as well as to the
    multivariate spectrum.
    """
    n = data.n_obs
    if n < 2:
        raise ValueError("MFPCA needs at least 2 curves")
    bases = []
    for comp in data.components:
        mu = estimate_mean(comp)
        cov = estimate_covariance(comp, mu, smooth_diagonal=smooth_diagonal)
        bases.append(fit_ufpca(cov, mu, comp.grid, truncation))
    Z = np.hstack([compute_scores(c, b) for c, b in zip(data.components, bases)])
    Zhat = Z.T @ Z / (n - 1)
    lam, V = np.linalg.eigh((Zhat + Zhat.T) / 2)
    order = np.argsort(lam)[::-1]
    lam, V = np.clip(lam[order], 0.0, None), V[:, order]
    V = fix_signs(V.T).T
    degenerate = bool(lam[0] <= 0) or all(b.degenerate for b in bases)
    positive = lam > lam[0] * 1e-12 if lam[0] > 0 else np.zeros_like(lam, dtype=bool)
    if degenerate or not np.any(positive):
        J = 1
        degenerate = True
        lam = np.zeros_like(lam)
    else:
        J = resolve_truncation(lam[positive], truncation)
    V = V[:, :J]
    return MfpcaModel(
        means=tuple(b.mean for b in bases),
        uni_bases=tuple(bases),
        eigenvalues=lam[:J].copy(),
        eigenvectors=V,
        eigenfunctions=_eigenfunctions(bases, V),
        all_eigenvalues=lam,
        degenerate=degenerate,
    )


def _eigenfunctions(bases: Sequence[UnivariateBasis], V: np.ndarray) -> tuple:
    out, start = [], 0
    for b in bases:
        stop = start + b.n_components
        out.append(V[start:stop].T @ b.eigenfunctions)
        start = stop
    return tuple(out)


def project(model: MfpcaModel, curves: MultiFunData) -> np.ndarray:
    """Multivariate scores of ``curves``, shape (N, n_kept)."""
    return univariate_scores(model, curves) @ model.eigenvectors


def reconstruct(model: MfpcaModel, scores: np.ndarray) -> MultiFunData:
    """Truncated Karhunen-Loeve reconstruction ``mean + sum_j c_j phi_j``.

    ``scores`` may have fewer columns than the model keeps; the leading
    eigenfunctions are used.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    k = scores.shape[1]
    if k > model.n_kept:
        raise ValueError(f"got {k} scores per curve, model keeps {model.n_kept}")
    comps = tuple(
        UnivariateSample(b.grid, mu[None, :] + scores @ phi[:k])
        for b, mu, phi in zip(model.uni_bases, model.means, model.eigenfunctions)
    )
    return MultiFunData(comps)


def truncation_error(model: MfpcaModel, data: MultiFunData, n_components: int) -> float:
    """Mean squared L2 distance between ``data`` and its rank-``n_components`` reconstruction."""
    scores = project(model, data)[:, :n_components]
    rec = reconstruct(model, scores)
    resid = [a - b for a, b in zip(data.values, rec.values)]
    return float(np.mean(np.diag(gram(resid, resid, data.grids))))


def theoretical_score_moments(
    weights: Sequence[float],
    cluster_means: Sequence[Sequence[np.ndarray]],
    variances: np.ndarray,
    generators: Sequence[Sequence[np.ndarray]],
    targets: Sequence[Sequence[np.ndarray]],
    grids: Sequence[SamplingGrid],
    overall_mean: Sequence[np.ndarray] | None = None,
) -> dict:
    """Per-cluster moments of the scores of a Gaussian functional mixture.

    Curves of cluster ``k`` are ``mu_k + sum_l xi_l phi_l`` with independent
    ``xi_l ~ N(0, variances[k, l])``. Their scores on the target functions
    ``psi_j`` are Gaussian with mean ``<mu_k - mu, psi_j>`` and covariance
    ``sum_l <phi_l, psi_i><phi_l, psi_j> variances[k, l]``.

    Each function argument is a list over functions of per-component arrays.
    ``overall_mean`` defaults to the mixture mean ``sum_k p_k mu_k``.

    Returns
    -------
    dict with ``means`` (K, J), ``variances`` (K, J) and ``covariances`` (K, J, J).
    """
    grids = tuple(grids)
    p = np.asarray(weights, dtype=float)
    sig2 = np.atleast_2d(np.asarray(variances, dtype=float))
    P = len(grids)
    for f in list(cluster_means) + list(generators) + list(targets):
        if len(f) != P:
            raise GridMismatchError("functions must have one array per grid")
    if overall_mean is None:
        overall_mean = [
            sum(pk * np.asarray(mk[c], dtype=float) for pk, mk in zip(p, cluster_means))
            for c in range(P)
        ]

    def stack(funcs, c):
        return np.vstack([np.asarray(f[c], dtype=float) for f in funcs])

    psi = [stack(targets, c) for c in range(P)]
    phi = [stack(generators, c) for c in range(P)]
    centered = [stack(cluster_means, c) - np.asarray(overall_mean[c], dtype=float) for c in range(P)]
    m = gram(centered, psi, grids)  # (K, J)
    G = gram(phi, psi, grids)  # (L, J)
    cov = np.einsum("li,lj,kl->kij", G, G, sig2)
    return {
        "means": m,
        "variances": np.einsum("kjj->kj", cov).copy(),
        "covariances": cov,
    }
