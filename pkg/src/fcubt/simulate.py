"""Seeded generators for the benchmark scenarios."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .fdata import MultiFunData, SamplingGrid, UnivariateSample

N_POINTS = 101

# per-cluster coefficient variances of the two Wiener-basis coefficient laws
HIGH_VARIANCES = (16.0, 64.0 / 9.0, 16.0 / 9.0)
LOW_VARIANCES = (1.0, 4.0 / 9.0, 1.0 / 9.0)

NOISE_VARIANCE = 0.5


@dataclass(frozen=True, eq=False)
class ScenarioSample:
    data: MultiFunData
    true_labels: np.ndarray
    scenario_id: int
    seed: int
    noiseless: MultiFunData | None = None


def default_grid() -> SamplingGrid:
    return SamplingGrid.uniform(N_POINTS)


def _grid_points(grid) -> np.ndarray:
    return grid.points if isinstance(grid, SamplingGrid) else np.asarray(grid, dtype=float)


def wiener_basis(k: int, grid) -> np.ndarray:
    """sqrt(2) sin((k - 1/2) pi t), the k-th eigenfunction of Brownian motion on [0, 1]."""
    if k < 1:
        raise ValueError("basis index starts at 1")
    t = _grid_points(grid)
    return np.sqrt(2.0) * np.sin((k - 0.5) * np.pi * t)


def mu1(t):
    return 20.0 / (1.0 + np.exp(-t))


def mu2(t):
    return -25.0 / (1.0 + np.exp(-t))


def scenario1_components(t: np.ndarray) -> dict:
    """Mean curve and coefficient variances of each Scenario-1 cluster (labels 1..5)."""
    return {
        1: (mu1(t), HIGH_VARIANCES),
        2: (mu1(t), LOW_VARIANCES),
        3: (mu2(t), HIGH_VARIANCES),
        4: (mu2(t), LOW_VARIANCES),
        5: (mu2(t) - 15.0 * t, LOW_VARIANCES),
    }


def _curve_rngs(seed: int, n: int):
    # one independent stream per curve, keyed by curve index
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def scenario1(n: int, seed: int = 0, grid: SamplingGrid | None = None) -> ScenarioSample:
    """Noiseless univariate curves from a five-cluster Wiener-basis mixture."""
    if n < 5:
        raise ValueError("scenario 1 needs n >= 5")
    grid = grid or default_grid()
    t = grid.points
    comps = scenario1_components(t)
    phi = np.vstack([wiener_basis(k, t) for k in (1, 2, 3)])
    labels = np.empty(n, dtype=int)
    values = np.empty((n, t.size))
    for i, rng in enumerate(_curve_rngs(seed, n)):
        label = int(rng.integers(1, 6))
        mean, var = comps[label]
        coef = rng.standard_normal(3) * np.sqrt(var)
        labels[i] = label
        values[i] = mean + coef @ phi
    data = MultiFunData((UnivariateSample(grid, values),))
    return ScenarioSample(data, labels, 1, seed, noiseless=data)


def fbm_covariance(H: float, t: np.ndarray) -> np.ndarray:
    s, u = np.meshgrid(t, t, indexing="ij")
    return 0.5 * (np.abs(s) ** (2 * H) + np.abs(u) ** (2 * H) - np.abs(s - u) ** (2 * H))


@lru_cache(maxsize=32)
def _fbm_factor(H: float, points: bytes) -> np.ndarray:
    t = np.frombuffer(points)
    cov = fbm_covariance(H, t)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return np.linalg.cholesky(cov + 1e-12 * np.eye(t.size))


def fbm(H: float, grid, seed=None, size: int | None = None, rng: np.random.Generator | None = None) -> np.ndarray:
    """Fractional Brownian motion sampled on ``grid`` by Cholesky factorization.

    A grid point at 0 is pinned to 0 (the covariance row vanishes there).
    Returns one path, or ``size`` paths as rows.
    """
    if not 0 < H < 1:
        raise ValueError("the Hurst parameter must lie in (0, 1)")
    t = _grid_points(grid)
    rng = rng if rng is not None else np.random.default_rng(seed)
    zero = t == 0
    out = np.zeros((1 if size is None else size, t.size))
    if np.any(~zero):
        L = _fbm_factor(float(H), np.ascontiguousarray(t[~zero]).tobytes())
        z = rng.standard_normal((out.shape[0], L.shape[0]))
        out[:, ~zero] = z @ L.T
    return out[0] if size is None else out


def hat(t: np.ndarray, center: float) -> np.ndarray:
    """(6 - |20 t - center|)_+ / 4."""
    return np.clip(6.0 - np.abs(20.0 * t - center), 0.0, None) / 4.0


def h1(t):
    return hat(t, 6.0)


def h2(t):
    return hat(t, 14.0)


def h3(t):
    return hat(t, 10.0)


def b(H: float, t: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """(1 + t)^(-H) B_H(1 + t), with B_H drawn on the shifted grid directly."""
    return (1.0 + t) ** (-H) * fbm(H, 1.0 + t, rng=rng)


# label -> ((shape, multiplier of b_0.9), (shape, multiplier of b_0.8))
SCENARIO2_CLUSTERS = {
    1: ((h1, 1.0), (h3, 1.5)),
    2: ((h2, 1.0), (h3, 0.8)),
    3: ((h1, 1.0), (h3, 0.2)),
    4: ((h2, 0.1), (h2, 0.2)),
    5: ((h3, 1.0), (h1, 0.2)),
}


def _bivariate(n: int, seed: int, alpha: float, scenario_id: int, grid) -> ScenarioSample:
    if n < 5:
        raise ValueError(f"scenario {scenario_id} needs n >= 5")
    grid = grid or default_grid()
    t = grid.points
    labels = np.empty(n, dtype=int)
    clean = np.empty((2, n, t.size))
    noisy = np.empty((2, n, t.size))
    sd = np.sqrt(NOISE_VARIANCE)
    for i, rng in enumerate(_curve_rngs(seed, n)):
        label = int(rng.integers(1, 6))
        (f1, a1), (f2, a2) = SCENARIO2_CLUSTERS[label]
        x1 = f1(t) + a1 * b(0.9, t, rng)
        x2 = f2(t) + a2 * b(0.8, t, rng)
        if alpha:
            x1 = x1 + alpha * x2
        labels[i] = label
        clean[0, i], clean[1, i] = x1, x2
        noisy[0, i] = x1 + sd * rng.standard_normal(t.size)
        noisy[1, i] = x2 + sd * rng.standard_normal(t.size)
    data = MultiFunData(tuple(UnivariateSample(grid, noisy[p]) for p in range(2)))
    truth = MultiFunData(tuple(UnivariateSample(grid, clean[p]) for p in range(2)))
    return ScenarioSample(data, labels, scenario_id, seed, noiseless=truth)


def scenario2(n: int, seed: int = 0, grid: SamplingGrid | None = None) -> ScenarioSample:
    """Noisy bivariate curves: hat functions plus scaled fractional Brownian motion."""
    return _bivariate(n, seed, 0.0, 2, grid)


def scenario3(n: int, seed: int = 0, alpha: float = 0.4, grid: SamplingGrid | None = None) -> ScenarioSample:
    """Scenario 2 with the first component replaced by X1 + alpha * X2 before noise."""
    return _bivariate(n, seed, alpha, 3, grid)


def simulate(scenario: int, n: int, seed: int = 0) -> ScenarioSample:
    if scenario == 1:
        return scenario1(n, seed)
    if scenario == 2:
        return scenario2(n, seed)
    if scenario == 3:
        return scenario3(n, seed)
    raise ValueError(f"unknown scenario {scenario}; expected 1, 2 or 3")
