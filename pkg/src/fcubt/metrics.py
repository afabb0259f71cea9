"""Partition agreement measures."""

from __future__ import annotations

from typing import Sequence

import numpy as np


def _comb2(counts) -> int:
    # exact integer C(n, 2) sums
    return sum(int(c) * (int(c) - 1) // 2 for c in counts)


def contingency(u: Sequence, v: Sequence) -> np.ndarray:
    """Counts n_ij of items labelled ``i`` in ``u`` and ``j`` in ``v``."""
    _, ui = np.unique(np.asarray(u), return_inverse=True)
    _, vi = np.unique(np.asarray(v), return_inverse=True)
    table = np.zeros((ui.max() + 1, vi.max() + 1), dtype=np.int64)
    np.add.at(table, (ui, vi), 1)
    return table


def ari(u: Sequence, v: Sequence) -> float:
    """Adjusted Rand index between two labelings of the same items.

    Returns 1.0 when the index, its expectation and its maximum coincide,
    which happens when both partitions are trivial.
    """
    u, v = np.asarray(u).ravel(), np.asarray(v).ravel()
    if u.size != v.size:
        raise ValueError(f"label vectors differ in length: {u.size} != {v.size}")
    n = u.size
    if n < 2:
        raise ValueError("the adjusted Rand index needs at least 2 items")
    table = contingency(u, v)
    index = _comb2(table.ravel())
    rows = _comb2(table.sum(axis=1))
    cols = _comb2(table.sum(axis=0))
    total = n * (n - 1) // 2
    # scale by total to keep everything integral until the final division
    num = index * total - rows * cols
    den = (rows + cols) * total - 2 * rows * cols
    if den == 0:
        return 1.0
    return 2 * num / den
