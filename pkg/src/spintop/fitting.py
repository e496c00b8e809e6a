"""Skew-normal profile fits, linear rating-system maps and Elo histograms."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize_scalar
from scipy.stats import skewnorm
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .payoff import BinScheme, records_to_arrays

logger = logging.getLogger(__name__)


@dataclass
class SkewNormalFit:
    amplitude: float
    location: float
    scale: float
    shape: float
    mse: float
    peak_x: float
    mse_path: list[float] = field(default_factory=list, repr=False)

    def __call__(self, x):
        return skew_normal_curve(x, self.amplitude, self.location, self.scale, self.shape)

    def to_dict(self) -> dict:
        return {"amplitude": self.amplitude, "location": self.location,
                "scale": self.scale, "shape": self.shape, "mse": self.mse,
                "peak_x": self.peak_x}


def skew_normal_curve(x, amplitude, location, scale, shape):
    """``amplitude * f((x - location) / scale; shape)`` with ``f`` the standard skew-normal pdf."""
    return amplitude * skewnorm.pdf((np.asarray(x, dtype=float) - location) / scale, shape)


def _start_grid(x, y):
    span = x.max() - x.min()
    for q in (0.25, 0.5, 0.75):
        loc = float(np.quantile(x, q))
        for scale in (span / 8, span / 4):
            for shape in (-3.0, 0.0, 3.0):
                # amplitude so the start peaks near the observed maximum
                peak = skewnorm.pdf(np.linspace(-4, 4, 801), shape).max()
                yield np.array([y.max() / peak, loc, scale, shape])


def _peak(fit_fn, lo, hi):
    grid = np.linspace(lo, hi, 2001)
    vals = fit_fn(grid)
    i = int(np.argmax(vals))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if a < b:
        res = minimize_scalar(lambda t: -fit_fn(t), bounds=(a, b), method="bounded",
                              options={"xatol": 1e-9 * max(1.0, hi - lo)})
        if res.success and -res.fun >= vals[i]:
            return float(res.x)
    return float(grid[i])


def fit_skew_normal(points, n_starts: int | None = None) -> SkewNormalFit:
    """Least-squares fit of an amplitude-scaled skew-normal density to ``(x, y)`` points.

    Multi-start local descent from a fixed grid of 18 starts; the best local
    optimum wins. ``mse_path`` holds the best-so-far MSE after each start.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array of (x, y)")
    if pts.shape[0] < 5:
        raise ValueError(f"need at least 5 points, got {pts.shape[0]}")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(y < 0):
        raise ValueError("y values must be non-negative")
    if not np.any(y > 0):
        raise ValueError("all y values are zero")
    span = x.max() - x.min()
    if span <= 0:
        raise ValueError("x values must not all coincide")

    # work in standardised units so the four parameters are comparably scaled
    xc, xs = x.mean(), span
    ys = y.max()
    u, v = (x - xc) / xs, y / ys

    def resid(theta):
        return skew_normal_curve(u, *theta) - v

    lower = [0.0, -np.inf, 1e-6, -50.0]
    upper = [np.inf, np.inf, np.inf, 50.0]
    starts = list(_start_grid(u, v))
    if n_starts is not None:
        starts = starts[:n_starts]
    best, best_cost, path = None, np.inf, []
    for theta0 in starts:
        try:
            res = least_squares(resid, theta0, bounds=(lower, upper), method="trf",
                                x_scale="jac", xtol=1e-10, ftol=1e-10, gtol=1e-10,
                                max_nfev=1000)
        except ValueError:
            path.append(best_cost)
            continue
        if res.cost < best_cost:
            best, best_cost = res.x, res.cost
        path.append(best_cost)
    if best is None:
        raise RuntimeError("skew-normal fit failed from every start")

    amp, loc, scale, shape = best
    fit_amp, fit_loc, fit_scale = amp * ys, loc * xs + xc, scale * xs
    mse_path = [2 * c / x.size * ys**2 for c in path]
    mse = float(np.mean((skew_normal_curve(x, fit_amp, fit_loc, fit_scale, shape) - y) ** 2))
    curve = lambda t: skew_normal_curve(t, fit_amp, fit_loc, fit_scale, shape)  # noqa: E731
    return SkewNormalFit(float(fit_amp), float(fit_loc), float(fit_scale), float(shape),
                         mse, _peak(curve, x.min(), x.max()), mse_path)


class SkewNormalRegressor(RegressorMixin, BaseEstimator):
    """``fit(x, y)`` / ``predict(x)`` wrapper around :func:`fit_skew_normal`."""

    def __init__(self, n_starts=None):
        self.n_starts = n_starts

    def fit(self, X, y):
        x = np.asarray(X, dtype=float).reshape(-1)
        self.fit_ = fit_skew_normal(np.column_stack([x, np.asarray(y, dtype=float)]),
                                    self.n_starts)
        self.peak_x_ = self.fit_.peak_x
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        return self.fit_(np.asarray(X, dtype=float).reshape(-1))


@dataclass
class LinearMap:
    slope: float
    intercept: float
    r_squared: float
    rmse: float = 0.0
    n: int = 0

    def translate(self, x):
        return self.slope * np.asarray(x, dtype=float) + self.intercept

    def inverse_translate(self, y):
        if self.slope == 0:
            raise ZeroDivisionError("a flat map has no inverse")
        return (np.asarray(y, dtype=float) - self.intercept) / self.slope

    def then(self, other: "LinearMap") -> "LinearMap":
        """Compose: apply ``self`` first, then ``other``."""
        return LinearMap(other.slope * self.slope,
                         other.slope * self.intercept + other.intercept,
                         float("nan"))

    def to_dict(self) -> dict:
        r2 = None if np.isnan(self.r_squared) else self.r_squared
        return {"slope": self.slope, "intercept": self.intercept, "r_squared": r2, "rmse": self.rmse, "n": self.n}


def fit_linear_map(pairs) -> LinearMap:
    """Ordinary least-squares line through ``(x, y)`` rating pairs."""
    pts = np.asarray(pairs, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need at least two (x, y) pairs")
    x, y = pts[:, 0], pts[:, 1]
    dx = x - x.mean()
    sxx = float(dx @ dx)
    if sxx == 0:
        raise ValueError("all x values are identical")
    slope = float(dx @ (y - y.mean())) / sxx
    intercept = float(y.mean() - slope * x.mean())
    resid = y - (slope * x + intercept)
    dy = y - y.mean()
    syy = float(dy @ dy)
    r2 = 1.0 if syy == 0 else max(0.0, 1.0 - float(resid @ resid) / syy)
    if slope <= 0:
        warnings.warn(f"rating map is not increasing (slope {slope:.4g})", stacklevel=2)
    return LinearMap(slope, intercept, r2, float(np.sqrt(np.mean(resid**2))), x.size)


class LinearRatingMap(RegressorMixin, BaseEstimator):
    """Estimator form of :func:`fit_linear_map` with an ``inverse_transform``."""

    def fit(self, X, y):
        x = np.asarray(X, dtype=float).reshape(-1)
        self.map_ = fit_linear_map(np.column_stack([x, np.asarray(y, dtype=float)]))
        self.coef_ = self.map_.slope
        self.intercept_ = self.map_.intercept
        return self

    def predict(self, X):
        check_is_fitted(self, "map_")
        return self.map_.translate(np.asarray(X, dtype=float).reshape(-1))

    def inverse_transform(self, y):
        check_is_fitted(self, "map_")
        return self.map_.inverse_translate(y)


RATING_SYSTEMS = ("lichess", "uscf", "fide")


def fit_rating_maps(table: dict[str, np.ndarray]) -> dict[str, LinearMap]:
    """Pairwise maps between the columns of a rating table (NaN = missing).

    Each pair uses the rows where both ratings are present.
    """
    out = {}
    for i, src in enumerate(RATING_SYSTEMS):
        for dst in RATING_SYSTEMS[i + 1:]:
            x, y = np.asarray(table[src], float), np.asarray(table[dst], float)
            ok = np.isfinite(x) & np.isfinite(y)
            out[f"{src}->{dst}"] = fit_linear_map(np.column_stack([x[ok], y[ok]]))
    return out


def elo_histogram(records, scheme: BinScheme) -> tuple[np.ndarray, int]:
    """Count both players' ratings per bin; returns ``(counts, overflow)``."""
    white, black, _ = records_to_arrays(records)
    idx = scheme.bin_index(np.concatenate([white, black]))
    inside = idx >= 0
    counts = np.bincount(idx[inside], minlength=scheme.m).astype(np.int64)
    return counts, int((~inside).sum())



@dataclass
class CompositionCheck:
    composed: LinearMap
    direct: LinearMap
    max_gap: float
    tolerance: float

    @property
    def consistent(self) -> bool:
        return self.max_gap <= self.tolerance


def check_composition(maps: dict[str, LinearMap], x) -> CompositionCheck:
    """Compare lichess->uscf->fide against the direct lichess->fide map over ``x``.

    The tolerance is the residual spread the two routes can accumulate: each
    stage's RMSE, the first scaled by the second stage's slope.
    """
    lu, uf, lf = maps["lichess->uscf"], maps["uscf->fide"], maps["lichess->fide"]
    composed = lu.then(uf)
    x = np.asarray(x, dtype=float)
    gap = float(np.max(np.abs(composed.translate(x) - lf.translate(x))))
    tol = abs(uf.slope) * lu.rmse + uf.rmse + lf.rmse
    return CompositionCheck(composed, lf, gap, tol)
