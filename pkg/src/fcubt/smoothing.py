"""Local polynomial curve smoothing and mean/covariance estimation on a common grid."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Sequence, Union

import numpy as np

from .fdata import MultiFunData, RawCurve, SamplingGrid, UnivariateSample

logger = logging.getLogger(__name__)

Kernel = Literal["epanechnikov", "gaussian"]

# number of near-diagonal points used to extrapolate the covariance diagonal
_DIAG_POINTS = 4


@dataclass(frozen=True)
class SmootherConfig:
    """Settings of the local polynomial smoother.

    Parameters
    ----------
    output_grid : SamplingGrid
        Grid on which smoothed curves are returned.
    degree : int
        Local polynomial degree, 0, 1 or 2.
    bandwidth : float or "auto"
        Kernel half-width in domain units. ``"auto"`` selects it by generalized
        cross-validation over a geometric candidate grid.
    kernel : {"epanechnikov", "gaussian"}
    """

    output_grid: SamplingGrid
    degree: int = 1
    bandwidth: Union[float, str] = "auto"
    kernel: Kernel = "epanechnikov"

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise ValueError("degree must be 0, 1 or 2")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "auto":
                raise ValueError("bandwidth must be a positive number or 'auto'")
        elif not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.kernel not in ("epanechnikov", "gaussian"):
            raise ValueError(f"unknown kernel {self.kernel!r}")


def min_points(degree: int) -> int:
    return max(5, degree + 2)


def _kernel(u: np.ndarray, kind: str) -> np.ndarray:
    if kind == "epanechnikov":
        return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)
    return np.exp(-0.5 * u * u)


def rule_of_thumb_bandwidth(times: np.ndarray, c: float = 1.0) -> float:
    """h = c * range * M^(-1/5)."""
    times = np.asarray(times, dtype=float)
    return c * (times[-1] - times[0]) * times.size ** (-0.2)


def smoother_matrix(
    times: np.ndarray,
    out: np.ndarray,
    bandwidth: float,
    degree: int = 1,
    kernel: str = "epanechnikov",
) -> np.ndarray:
    """Linear map from observations at ``times`` to local polynomial fits at ``out``.

    Row ``i`` holds the equivalent kernel weights of output point ``out[i]``.
    Output points whose window holds too few distinct observations get their
    bandwidth widened to reach the ``degree + 2`` nearest observations.
    """
    times = np.asarray(times, dtype=float)
    out = np.asarray(out, dtype=float)
    p = degree + 1
    # scale the local design for conditioning
    scale = max(times[-1] - times[0], np.finfo(float).tiny)
    dx = (times[None, :] - out[:, None]) / scale
    h = np.full(out.size, float(bandwidth))
    n_in = np.count_nonzero(np.abs(times[None, :] - out[:, None]) < h[:, None], axis=1)
    if kernel == "epanechnikov":
        short = n_in < degree + 2
        if np.any(short):
            k = min(degree + 2, times.size) - 1
            dist = np.sort(np.abs(times[None, :] - out[short, None]), axis=1)[:, k]
            h[short] = np.maximum(h[short], dist * 1.0001 + 1e-12 * scale)

    rows = np.empty((out.size, times.size))
    for i in range(out.size):
        w = _kernel((times - out[i]) / h[i], kernel)
        X = np.vander(dx[i], p, increasing=True)
        XtW = X.T * w
        A = XtW @ X
        try:
            if np.linalg.cond(A) > 1e12:
                raise np.linalg.LinAlgError
            coef = np.linalg.solve(A, XtW)
        except np.linalg.LinAlgError:
            # fall back to the nearest degree + 2 points with equal weights
            nearest = np.argsort(np.abs(times - out[i]), kind="stable")[: degree + 2]
            w = np.zeros_like(times)
            w[nearest] = 1.0
            XtW = X.T * w
            coef = np.linalg.lstsq(XtW @ X, XtW, rcond=None)[0]
        rows[i] = coef[0]
    return rows


def _candidate_bandwidths(times: np.ndarray, degree: int, n: int = 25) -> np.ndarray:
    span = times[-1] - times[0]
    gap = np.max(np.diff(times))
    lo = max(gap * (degree + 1) * 0.75, span * 1e-3)
    hi = span / 2
    if lo >= hi:
        return np.array([hi])
    return np.geomspace(lo, hi, n)


def select_bandwidth(
    times: np.ndarray,
    values: np.ndarray,
    degree: int = 1,
    kernel: str = "epanechnikov",
) -> float:
    """Generalized cross-validation bandwidth for curves sharing ``times``.

    ``values`` may hold several curves (one per row); their residual sums of
    squares are pooled.
    """
    times = np.asarray(times, dtype=float)
    Y = np.atleast_2d(values)
    m = times.size
    best_h, best_score = None, np.inf
    for h in _candidate_bandwidths(times, degree):
        S = smoother_matrix(times, times, h, degree, kernel)
        dof = np.trace(S)
        if dof >= m - 0.5:
            continue
        resid = Y - Y @ S.T
        score = np.mean(resid**2) / (1.0 - dof / m) ** 2
        if score < best_score:
            best_h, best_score = h, score
    if best_h is None:
        best_h = rule_of_thumb_bandwidth(times)
    return float(best_h)


def smooth_curve(times, values, config: SmootherConfig) -> np.ndarray:
    """Smooth one component of one noisy curve onto ``config.output_grid``."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.size < config.degree + 2:
        raise ValueError(
            f"need at least {config.degree + 2} observations, got {times.size}"
        )
    h = config.bandwidth
    if h == "auto":
        h = select_bandwidth(times, values, config.degree, config.kernel)
    S = smoother_matrix(times, config.output_grid.points, h, config.degree, config.kernel)
    return S @ values


def smooth_component(
    times: Sequence[np.ndarray],
    values: Sequence[np.ndarray],
    config: SmootherConfig,
) -> UnivariateSample:
    """Smooth many curves of one component onto a common output grid.

    Curves observed at identical times share a single smoother matrix, and
    with ``bandwidth="auto"`` a single bandwidth selected on all of them.
    """
    out = np.empty((len(times), len(config.output_grid)))
    groups: dict = {}
    for i, t in enumerate(times):
        key = np.asarray(t, dtype=float).tobytes()
        groups.setdefault(key, []).append(i)
    for idx in groups.values():
        t = np.asarray(times[idx[0]], dtype=float)
        if t.size < config.degree + 2:
            raise ValueError(
                f"curve {idx[0]} has {t.size} observations, need {config.degree + 2}"
            )
        Y = np.vstack([np.asarray(values[i], dtype=float) for i in idx])
        h = config.bandwidth
        if h == "auto":
            h = select_bandwidth(t, Y, config.degree, config.kernel)
        S = smoother_matrix(t, config.output_grid.points, h, config.degree, config.kernel)
        out[idx] = Y @ S.T
    return UnivariateSample(config.output_grid, out)


def smooth_curves(
    curves: Sequence[RawCurve],
    output_grids: Sequence[SamplingGrid],
    degree: int = 1,
    bandwidth: Union[float, str] = "auto",
    kernel: Kernel = "epanechnikov",
) -> MultiFunData:
    """Smooth every component of every raw curve onto ``output_grids``."""
    comps = []
    for p, grid in enumerate(output_grids):
        cfg = SmootherConfig(grid, degree, bandwidth, kernel)
        comps.append(
            smooth_component([c.times[p] for c in curves], [c.values[p] for c in curves], cfg)
        )
    return MultiFunData(tuple(comps))


def smooth_sample(
    data: MultiFunData,
    degree: int = 1,
    bandwidth: Union[float, str] = "auto",
    kernel: Kernel = "epanechnikov",
) -> MultiFunData:
    """Smooth noisy curves that already share a grid, keeping that grid."""
    comps = []
    for comp in data.components:
        cfg = SmootherConfig(comp.grid, degree, bandwidth, kernel)
        t = comp.grid.points
        comps.append(smooth_component([t] * comp.n_obs, list(comp.values), cfg))
    return MultiFunData(tuple(comps))


def interpolate_curves(curves: Sequence[RawCurve], output_grids: Sequence[SamplingGrid]) -> MultiFunData:
    """Linear interpolation onto ``output_grids``; the path used for noiseless inputs."""
    comps = []
    for p, grid in enumerate(output_grids):
        vals = np.vstack([np.interp(grid.points, c.times[p], c.values[p]) for c in curves])
        comps.append(UnivariateSample(grid, vals))
    return MultiFunData(tuple(comps))


def estimate_mean(sample: UnivariateSample) -> np.ndarray:
    if sample.n_obs < 1:
        raise ValueError("cannot estimate a mean from an empty sample")
    return sample.values.mean(axis=0)


def _diagonal_from_neighbours(cov: np.ndarray, t: np.ndarray, L: int = _DIAG_POINTS) -> np.ndarray:
    # Quadratic fit of C against the separation |s - t| along the anti-diagonal
    # through (i, i), evaluated at separation 0. Near an edge the anti-diagonal
    # runs out, so walk along the row towards the interior instead.
    m = t.size
    diag = np.diag(cov).copy()
    L = min(L, m - 1)
    if L < 1:
        return diag
    for i in range(m):
        ks = np.arange(1, L + 1)
        if i - L >= 0 and i + L <= m - 1:
            a, b = i - ks, i + ks
        elif i + L <= m - 1:
            a, b = np.full(L, i), i + ks
        elif i - L >= 0:
            a, b = i - ks, np.full(L, i)
        else:
            continue
        sep = t[b] - t[a]
        deg = min(2, L - 1)
        X = np.vander(sep, deg + 1, increasing=True)
        coef = np.linalg.lstsq(X, cov[a, b], rcond=None)[0]
        diag[i] = coef[0]
    return diag


def estimate_covariance(
    sample: UnivariateSample,
    mean: np.ndarray | None = None,
    smooth_diagonal: bool = True,
) -> np.ndarray:
    """Covariance surface of a sample of curves on a common grid.

    Off-diagonal entries are ``mean(X(s) X(t)) - mu(s) mu(t)``; diagonal
    entries are extrapolated from their near-diagonal neighbours, which
    removes residual measurement-noise variance from the diagonal.
    """
    if sample.n_obs < 2:
        raise ValueError("covariance estimation needs at least 2 curves")
    X = sample.values
    mu = estimate_mean(sample) if mean is None else np.asarray(mean, dtype=float)
    # mean(X X') - mu mu' written around the sample mean to avoid cancellation;
    # the correction vanishes exactly when mu is the sample mean
    xbar = estimate_mean(sample)
    D = X - xbar
    cov = (D.T @ D) / X.shape[0]
    delta = xbar - mu
    if np.any(delta):
        cov += np.outer(delta, mu) + np.outer(mu, delta) + np.outer(delta, delta)
    if smooth_diagonal:
        np.fill_diagonal(cov, _diagonal_from_neighbours(cov, sample.grid.points))
    return (cov + cov.T) / 2
