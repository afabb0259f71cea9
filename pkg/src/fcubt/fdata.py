"""Containers for sampled (multivariate) functional data and the L2 geometry on them."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class GridMismatchError(ValueError):
    """Raised when two functional objects are not sampled on the same grids."""


@dataclass(frozen=True, eq=False)
class SamplingGrid:
    """Strictly increasing, finite sampling locations of one component."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size < 2:
            raise ValueError("a sampling grid needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, n_points: int, start: float = 0.0, stop: float = 1.0) -> "SamplingGrid":
        return cls(np.linspace(start, stop, n_points))

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, SamplingGrid):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(np.all(self.points == other.points))

    def __hash__(self):
        return hash(self.points.tobytes())

    @property
    def weights(self) -> np.ndarray:
        return quadrature_weights(self)


def quadrature_weights(grid: SamplingGrid | np.ndarray) -> np.ndarray:
    """Trapezoid weights for integrating a function sampled on ``grid``.

    The weights are nonnegative and sum to the length of the grid's range.
    """
    pts = grid.points if isinstance(grid, SamplingGrid) else np.asarray(grid, dtype=float)
    if pts.size < 2:
        raise ValueError("quadrature needs at least 2 grid points")
    dt = np.diff(pts)
    w = np.zeros_like(pts)
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


@dataclass(frozen=True, eq=False)
class UnivariateSample:
    """N curves of one component, row ``n`` holding curve ``n`` evaluated on ``grid``."""

    grid: SamplingGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, ndmin=2)
        if vals.ndim != 2 or vals.shape[1] != len(self.grid):
            raise ValueError(
                f"values must have shape (N, {len(self.grid)}), got {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("curve values must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n_obs(self) -> int:
        return self.values.shape[0]

    def subset(self, idx) -> "UnivariateSample":
        return UnivariateSample(self.grid, self.values[np.asarray(idx)])


@dataclass(frozen=True, eq=False)
class MultiFunData:
    """A sample of N multivariate curves with P components, each on its own grid."""

    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        comps = tuple(self.components)
        if len(comps) < 1:
            raise ValueError("multivariate functional data needs at least one component")
        n = {c.n_obs for c in comps}
        if len(n) != 1:
            raise ValueError(f"components disagree on the number of curves: {sorted(n)}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_arrays(cls, grids: Sequence, values: Sequence) -> "MultiFunData":
        comps = []
        for g, v in zip(grids, values):
            grid = g if isinstance(g, SamplingGrid) else SamplingGrid(g)
            comps.append(UnivariateSample(grid, v))
        return cls(tuple(comps))

    @property
    def n_obs(self) -> int:
        return self.components[0].n_obs

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def grids(self) -> tuple:
        return tuple(c.grid for c in self.components)

    @property
    def values(self) -> list:
        return [c.values for c in self.components]

    def subset(self, idx) -> "MultiFunData":
        return MultiFunData(tuple(c.subset(idx) for c in self.components))

    def same_grids(self, grids: Sequence[SamplingGrid]) -> bool:
        grids = tuple(grids)
        return len(grids) == self.n_components and all(a == b for a, b in zip(self.grids, grids))


@dataclass(frozen=True, eq=False)
class RawCurve:
    """Irregular noisy observations of one curve: per component a (times, values) pair."""

    times: tuple
    values: tuple

    def __post_init__(self):
        ts = tuple(np.asarray(t, dtype=float).ravel() for t in self.times)
        ys = tuple(np.asarray(y, dtype=float).ravel() for y in self.values)
        if len(ts) != len(ys) or not ts:
            raise ValueError("times and values must list the same, nonzero, number of components")
        for t, y in zip(ts, ys):
            if t.size != y.size:
                raise ValueError("times and values differ in length")
            if t.size < 2:
                raise ValueError("each component needs at least 2 observations")
            if np.any(np.diff(t) <= 0):
                raise ValueError("observation times must be strictly increasing")
        object.__setattr__(self, "times", ts)
        object.__setattr__(self, "values", ys)

    @property
    def n_components(self) -> int:
        return len(self.times)


def _check_layout(grids, *arrays):
    for arr in arrays:
        if len(arr) != len(grids):
            raise GridMismatchError(
                f"expected {len(grids)} components, got {len(arr)}"
            )
        for g, a in zip(grids, arr):
            if np.shape(a)[-1] != len(g):
                raise GridMismatchError(
                    f"component sampled on {np.shape(a)[-1]} points, grid has {len(g)}"
                )


def inner_product(f: Sequence, g: Sequence, grids: Sequence[SamplingGrid]) -> float:
    """L2 inner product of two multivariate curves, summed over components.

    ``f`` and ``g`` are sequences with one 1-D array per component, sampled on
    ``grids``. The sum is taken over ``f * g`` so that swapping the arguments
    gives the exact same floating point result.
    """
    _check_layout(grids, f, g)
    total = 0.0
    for grid, fp, gp in zip(grids, f, g):
        prod = np.asarray(fp, dtype=float) * np.asarray(gp, dtype=float)
        total += float(np.dot(quadrature_weights(grid), prod))
    return total


def gram(f: Sequence, g: Sequence, grids: Sequence[SamplingGrid]) -> np.ndarray:
    """Matrix of inner products between the rows of ``f`` and the rows of ``g``.

    Each of ``f`` and ``g`` holds one (rows, M_p) array per component.
    """
    _check_layout(grids, f, g)
    out = None
    for grid, fp, gp in zip(grids, f, g):
        w = quadrature_weights(grid)
        block = (np.atleast_2d(fp) * w) @ np.atleast_2d(gp).T
        out = block if out is None else out + block
    return out


def center(data: MultiFunData, mean: Sequence) -> MultiFunData:
    """Subtract ``mean`` (one curve per component) from every curve of ``data``."""
    _check_layout(data.grids, mean)
    comps = tuple(
        UnivariateSample(c.grid, c.values - np.asarray(m, dtype=float)[None, :])
        for c, m in zip(data.components, mean)
    )
    return MultiFunData(comps)
