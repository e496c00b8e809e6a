"""Input checks shared by the analysis modules."""

from __future__ import annotations

import numpy as np

from .payoff import PayoffMatrix

SKEW_RTOL = 1e-10


def as_payoff_array(matrix) -> np.ndarray:
    """Return a float skew-symmetric square array.

    Plain arrays are accepted when they are skew-symmetric up to a relative
    ``SKEW_RTOL``; the antisymmetric part is returned so downstream code can
    rely on exact skew-symmetry.
    """
    if isinstance(matrix, PayoffMatrix):
        return matrix.entries
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.size == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    scale = max(1.0, float(np.abs(a).max()))
    if np.abs(a + a.T).max() > SKEW_RTOL * scale:
        raise ValueError("matrix is not skew-symmetric")
    return (a - a.T) / 2


def check_index_set(index, m: int, name: str = "index set") -> np.ndarray:
    """Sorted unique strategy indices, all within ``[0, m)``."""
    if index is None:
        return np.arange(m)
    if isinstance(index, (set, frozenset)):
        index = sorted(index)
    idx = np.unique(np.asarray(index, dtype=np.int64).ravel())
    if idx.size == 0:
        raise ValueError(f"{name} is empty")
    if idx[0] < 0 or idx[-1] >= m:
        raise ValueError(f"{name} has indices outside [0, {m})")
    return idx


def is_unimodal(values, atol: float = 0.0) -> bool:
    """True when ``values`` rises (weakly) to a single peak, then falls (weakly)."""
    v = np.asarray(values, dtype=float)
    if v.size <= 2:
        return True
    d = np.diff(v)
    d = np.where(np.abs(d) <= atol, 0.0, d)
    falling = False
    for step in d:
        if step < 0:
            falling = True
        elif step > 0 and falling:
            return False
    return True
