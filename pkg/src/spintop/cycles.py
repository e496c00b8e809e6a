"""Rock-paper-scissors (3-cycle) counts through each pure strategy."""

from __future__ import annotations

import numpy as np

from ._validation import as_payoff_array


def to_adjacency(matrix) -> np.ndarray:
    """Beats-relation as a 0/1 int64 matrix: ``A[i, j] = 1`` iff ``M[i, j] > 0``.

    No epsilon is applied; draws and exact ties give no edge either way.
    """
    return (as_payoff_array(matrix) > 0).astype(np.int64)


def check_adjacency(adj) -> np.ndarray:
    a = np.asarray(adj)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be square")
    if not np.isin(a, (0, 1)).all():
        raise ValueError("adjacency entries must be 0 or 1")
    if np.any(np.diagonal(a)):
        raise ValueError("adjacency must have a zero diagonal")
    if np.any(a & a.T):
        raise ValueError("adjacency has an edge in both directions")
    return a.astype(np.int64)


def rps_cycle_counts(adj) -> np.ndarray:
    """Diagonal of ``A @ A @ A``: directed triangles through every strategy.

    Each triangle is seen once from each of its three vertices, so the total
    number of cycles is ``counts.sum() // 3``. Exact integer arithmetic.
    """
    a = check_adjacency(adj)
    two_step = a @ a
    return (two_step * a.T).sum(axis=1)


def total_cycles(counts) -> int:
    counts = np.asarray(counts)
    total = int(counts.sum())
    if total % 3:
        raise ValueError("cycle counts do not sum to a multiple of three")
    return total // 3
