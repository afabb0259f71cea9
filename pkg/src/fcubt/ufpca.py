"""Univariate functional PCA on a fixed sampling grid."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .fdata import GridMismatchError, SamplingGrid, UnivariateSample, quadrature_weights

Truncation = Union[int, float]


@dataclass(frozen=True, eq=False)
class UnivariateBasis:
    """Leading eigenpairs of one component's covariance operator.

    ``eigenfunctions`` has shape (J, M) and is orthonormal under the trapezoid
    inner product of ``grid``.
    """

    grid: SamplingGrid
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    mean: np.ndarray
    degenerate: bool = False

    @property
    def n_components(self) -> int:
        return self.eigenvalues.size


def fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each row so that its largest-magnitude entry is positive.

    Ties go to the earliest index, which is what ``argmax`` returns.
    """
    vectors = np.array(vectors, dtype=float, ndmin=2)
    idx = np.argmax(np.abs(vectors), axis=1)
    signs = np.sign(vectors[np.arange(vectors.shape[0]), idx])
    signs[signs == 0] = 1.0
    return vectors * signs[:, None]


def n_for_ratio(eigenvalues: np.ndarray, ratio: float) -> int:
    """Smallest J whose leading eigenvalues explain at least ``ratio`` of the total."""
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = lam.sum()
    if total <= 0:
        return 1
    frac = np.cumsum(lam) / total
    # guard against frac[-1] landing a hair below 1
    return int(min(np.searchsorted(frac, ratio - 1e-12) + 1, lam.size))


def resolve_truncation(eigenvalues: np.ndarray, truncation: Truncation) -> int:
    """Number of components for ``truncation``.

    An ``int`` is a fixed count (capped at the available eigenvalues); a float
    in (0, 1] is an explained-variance ratio.
    """
    n_avail = np.asarray(eigenvalues).size
    if isinstance(truncation, (int, np.integer)) and not isinstance(truncation, bool):
        if truncation < 1:
            raise ValueError("a fixed number of components must be >= 1")
        return int(min(truncation, n_avail))
    ratio = float(truncation)
    if not 0 < ratio <= 1:
        raise ValueError("an explained-variance ratio must lie in (0, 1]")
    return n_for_ratio(eigenvalues, ratio)


def fit_ufpca(
    covariance: np.ndarray,
    mean: np.ndarray,
    grid: SamplingGrid,
    truncation: Truncation = 0.95,
) -> UnivariateBasis:
    """Eigendecomposition of the integral operator with kernel ``covariance``.

    Solves the symmetrized problem W^{1/2} C W^{1/2} u = lambda u with W the
    trapezoid weights, and maps eigenvectors back by W^{-1/2} so that the
    eigenfunctions are orthonormal in L2. Nonpositive eigenvalues are dropped.
    """
    C = np.asarray(covariance, dtype=float)
    m = len(grid)
    if C.shape != (m, m):
        raise GridMismatchError(f"covariance has shape {C.shape}, grid has {m} points")
    w = quadrature_weights(grid)
    sw = np.sqrt(w)
    # interior trapezoid weights are positive; end weights too for a strict grid
    A = sw[:, None] * ((C + C.T) / 2) * sw[None, :]
    lam, U = np.linalg.eigh(A)
    order = np.argsort(lam)[::-1]
    lam, U = lam[order], U[:, order]
    mean = np.asarray(mean, dtype=float)
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    # round-off floor: relative to the spectrum, and to the squared level of the
    # curves so that identical curves (covariance ~ ulp^2) come out degenerate
    level = float(np.max(mean**2)) * w.sum() if mean.size else 0.0
    floor = max(1e-12 * scale, 1e-20 * level, np.finfo(float).tiny)
    positive = lam > floor
    if not np.any(positive):
        phi = np.full((1, m), 1.0 / np.sqrt(w.sum()))
        return UnivariateBasis(grid, np.zeros(1), phi, mean, True)
    lam, U = lam[positive], U[:, positive]
    J = resolve_truncation(lam, truncation)
    phi = fix_signs((U[:, :J] / sw[:, None]).T)
    return UnivariateBasis(grid, lam[:J].copy(), phi, mean)


def compute_scores(sample: UnivariateSample, basis: UnivariateBasis) -> np.ndarray:
    """Quadrature inner products of the centered curves with the eigenfunctions."""
    if sample.grid != basis.grid:
        raise GridMismatchError("sample and basis are sampled on different grids")
    w = quadrature_weights(basis.grid)
    return ((sample.values - basis.mean) * w) @ basis.eigenfunctions.T
