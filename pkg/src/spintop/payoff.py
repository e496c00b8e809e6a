"""Elo discretisation and the skew-symmetric two-way match-up payoff matrix."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .ingest import GameRecord

ELO_K = math.log(10.0) / 400.0

DEFAULT_BIN_RANGE = (600, 2900)
DEFAULT_BIN_WIDTH = 10


@dataclass(frozen=True)
class EloBin:
    lower: float
    upper: float
    index: int

    @property
    def midpoint(self) -> float:
        return (self.lower + self.upper) / 2


@dataclass(frozen=True, eq=False)
class BinScheme:
    """Contiguous Elo bins given by ``m + 1`` ascending edges.

    Bins are half-open ``[lo, hi)`` except the last, which also holds its upper
    edge, so every rating in range lands in exactly one bin.
    """

    edges: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("a bin scheme needs at least two edges")
        if not np.all(np.isfinite(edges)) or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must be finite and strictly increasing")
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)

    def __eq__(self, other):
        return isinstance(other, BinScheme) and np.array_equal(self.edges, other.edges)

    __hash__ = None

    @property
    def m(self) -> int:
        return self.edges.size - 1

    def __len__(self) -> int:
        return self.m

    @property
    def range(self) -> tuple[float, float]:
        return float(self.edges[0]), float(self.edges[-1])

    @property
    def bins(self) -> list[EloBin]:
        e = self.edges
        return [EloBin(float(e[i]), float(e[i + 1]), i) for i in range(self.m)]

    @property
    def midpoints(self) -> np.ndarray:
        return (self.edges[:-1] + self.edges[1:]) / 2

    def bin_index(self, ratings) -> np.ndarray:
        """Bin of each rating, ``-1`` when outside the covered range."""
        r = np.asarray(ratings, dtype=float)
        idx = np.searchsorted(self.edges, r, side="right") - 1
        idx = np.where(r == self.edges[-1], self.m - 1, idx)
        out = (r < self.edges[0]) | (r > self.edges[-1]) | ~np.isfinite(r)
        return np.where(out, -1, idx).astype(np.int64)

    def to_dict(self) -> dict:
        return {"edges": [float(x) for x in self.edges]}

    @classmethod
    def from_dict(cls, data: dict) -> "BinScheme":
        return cls(np.asarray(data["edges"], dtype=float))


def make_bin_scheme(bin_range: Sequence[float], width: float) -> BinScheme:
    """Bins ``[lo, lo+w), [lo+w, lo+2w), ...`` with the last one clipped at ``hi``."""
    lo, hi = bin_range
    if not width > 0:
        raise ValueError(f"bin width must be positive, got {width}")
    if not hi - lo >= 2 * width:
        raise ValueError(f"range [{lo}, {hi}] cannot hold two bins of width {width}")
    n_full = int(math.floor((hi - lo) / width + 1e-9))
    edges = lo + width * np.arange(n_full + 1, dtype=float)
    if hi - edges[-1] > 1e-9 * width:
        edges = np.append(edges, float(hi))
    else:
        edges[-1] = float(hi)
    return BinScheme(edges)


def _odds(r_a, r_b):
    # evaluated on |diff| so that results are exactly antisymmetric
    diff = np.subtract(r_a, r_b, dtype=float)
    with np.errstate(over="ignore"):
        odds = np.power(10.0, np.abs(diff) / 400.0)
    return diff, odds


def expected_win_probability(r_a, r_b):
    """Logistic Elo win probability of ``a`` over ``b`` (k = ln 10 / 400)."""
    diff, odds = _odds(r_a, r_b)
    with np.errstate(invalid="ignore"):
        fav = np.where(np.isinf(odds), 1.0, odds / (odds + 1.0))
    p = np.where(diff >= 0, fav, 1.0 / (odds + 1.0))
    return float(p) if np.ndim(p) == 0 else p


def expected_score(r_a, r_b):
    """Elo-predicted score on the win=1 / draw=0 / loss=-1 scale, ``2 p - 1``."""
    diff, odds = _odds(r_a, r_b)
    with np.errstate(invalid="ignore"):
        mag = np.where(np.isinf(odds), 1.0, (odds - 1.0) / (odds + 1.0))
    s = np.sign(diff) * mag
    return float(s) if np.ndim(s) == 0 else s


@dataclass(eq=False)
class PayoffMatrix:
    """Dense skew-symmetric payoff of every bin against every bin.

    ``fill_mask[i, j]`` is true when both colour directions of the match-up had
    observed games; otherwise at least one side came from the Elo model.
    """

    entries: np.ndarray
    fill_mask: np.ndarray | None = None
    scheme: BinScheme | None = None
    skipped_count: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1] or entries.size == 0:
            raise ValueError(f"payoff matrix must be square and non-empty, got {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise ValueError("payoff matrix has non-finite entries")
        if not np.array_equal(entries, -entries.T):
            raise ValueError("payoff matrix is not skew-symmetric")
        if np.abs(entries).max() > 1.0:
            raise ValueError("payoff entries must lie in [-1, 1]")
        m = entries.shape[0]
        if self.fill_mask is None:
            mask = np.zeros((m, m), dtype=bool)
        else:
            mask = np.array(self.fill_mask, dtype=bool)
            if mask.shape != entries.shape:
                raise ValueError("fill_mask shape does not match entries")
        if self.scheme is not None and self.scheme.m != m:
            raise ValueError(f"scheme has {self.scheme.m} bins, matrix has {m}")
        entries.setflags(write=False)
        mask.setflags(write=False)
        self.entries = entries
        self.fill_mask = mask

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def midpoints(self) -> np.ndarray:
        if self.scheme is None:
            return np.arange(self.m, dtype=float)
        return self.scheme.midpoints

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def permuted(self, order) -> "PayoffMatrix":
        order = np.asarray(order)
        return PayoffMatrix(
            self.entries[np.ix_(order, order)], self.fill_mask[np.ix_(order, order)]
        )

    def to_dict(self) -> dict:
        return {
            "scheme": None if self.scheme is None else self.scheme.to_dict(),
            "entries": self.entries.tolist(),
            "fill_mask": self.fill_mask.tolist(),
            "skipped_count": int(self.skipped_count),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PayoffMatrix":
        scheme = data.get("scheme")
        return cls(
            np.asarray(data["entries"], dtype=float),
            np.asarray(data["fill_mask"], dtype=bool),
            None if scheme is None else BinScheme.from_dict(scheme),
            int(data.get("skipped_count", 0)),
        )


def records_to_arrays(records) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(white, black, white_score) arrays from GameRecords or an array triple."""
    if isinstance(records, tuple) and len(records) == 3:
        white, black, score = (np.asarray(a) for a in records)
        return white.astype(float), black.astype(float), score.astype(float)
    records = list(records)
    n = len(records)
    white = np.fromiter((r.white_rating for r in records), dtype=float, count=n)
    black = np.fromiter((r.black_rating for r in records), dtype=float, count=n)
    score = np.fromiter((int(r.outcome) for r in records), dtype=float, count=n)
    return white, black, score


def build_payoff_matrix(
    records: Sequence[GameRecord] | tuple, scheme: BinScheme
) -> PayoffMatrix:
    """Average two-way match-up score between every pair of bins.

    For bins ``i < j`` the "i plays White" and "i plays Black" representative
    scores are each the observed mean from ``i``'s side, or the Elo expectation
    between bin midpoints when no such game exists. The entry is their average;
    the lower triangle is the negated mirror.
    """
    if scheme is None or scheme.m < 1:
        raise ValueError("empty bin scheme")
    white, black, score = records_to_arrays(records)
    if white.size == 0:
        raise ValueError("no records given")
    m = scheme.m
    wi = scheme.bin_index(white)
    bi = scheme.bin_index(black)
    ok = (wi >= 0) & (bi >= 0)
    skipped = int(white.size - ok.sum())
    if not ok.any():
        raise ValueError("no in-range records")

    flat = wi[ok] * m + bi[ok]
    counts = np.bincount(flat, minlength=m * m).reshape(m, m)
    sums = np.bincount(flat, weights=score[ok], minlength=m * m).reshape(m, m)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean_white = sums / counts

    mid = scheme.midpoints
    elo = expected_score(mid[:, None], mid[None, :])
    elo = np.atleast_2d(elo)
    as_white = np.where(counts > 0, mean_white, elo)
    as_black = np.where(counts.T > 0, -mean_white.T, elo)
    upper = np.triu((as_white + as_black) / 2, k=1)
    entries = upper - upper.T

    observed = (counts > 0) & (counts.T > 0)
    np.fill_diagonal(observed, False)
    return PayoffMatrix(entries, observed, scheme, skipped)


class EloBinner(TransformerMixin, BaseEstimator):
    """Map ratings to bin indices of a fixed-width scheme (-1 when out of range)."""

    def __init__(self, bin_range=DEFAULT_BIN_RANGE, bin_width=DEFAULT_BIN_WIDTH):
        self.bin_range = bin_range
        self.bin_width = bin_width

    def fit(self, X=None, y=None):
        self.scheme_ = make_bin_scheme(self.bin_range, self.bin_width)
        self.n_bins_ = self.scheme_.m
        return self

    def transform(self, X):
        check_is_fitted(self, "scheme_")
        return self.scheme_.bin_index(X)


class PayoffMatrixBuilder(BaseEstimator):
    """Estimator wrapper: ``fit(records)`` leaves the matrix in ``payoff_``."""

    def __init__(self, bin_range=DEFAULT_BIN_RANGE, bin_width=DEFAULT_BIN_WIDTH):
        self.bin_range = bin_range
        self.bin_width = bin_width

    def fit(self, records, y=None):
        self.scheme_ = make_bin_scheme(self.bin_range, self.bin_width)
        self.payoff_ = build_payoff_matrix(records, self.scheme_)
        self.n_skipped_ = self.payoff_.skipped_count
        return self
