"""Fixed-memory fictitious play over the pure strategies of a payoff matrix."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import as_payoff_array
from .equilibrium import solve_maxent_ne, ts_strategy_winrate

logger = logging.getLogger(__name__)

ALLOCATIONS = ("uniform", "nash")


class _Converged:
    def __repr__(self):
        return "CONVERGED"


CONVERGED = _Converged()


@dataclass(frozen=True)
class PopulationState:
    """Population of ``k`` distinct pure strategies, oldest first."""

    members: tuple[int, ...]
    k: int
    t: int = 0
    allocation: np.ndarray | None = None
    trace: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        if len(self.members) != self.k:
            raise ValueError(f"population holds {len(self.members)} members, expected {self.k}")
        if len(set(self.members)) != self.k:
            raise ValueError("population members must be distinct")


def _allocation(a, members, mode):
    if mode == "uniform":
        return np.full(len(members), 1.0 / len(members))
    if mode == "nash":
        return solve_maxent_ne(a, np.array(members)).probabilities[
            np.argsort(np.argsort(members))
        ]
    raise ValueError(f"allocation must be one of {ALLOCATIONS}, got {mode!r}")


def wr_performance(state: PopulationState, matrix) -> float:
    """Allocation-weighted mean payoff of the members against all ``m`` strategies."""
    a = as_payoff_array(matrix)
    p = state.allocation
    if p is None:
        p = np.full(state.k, 1.0 / state.k)
    rows = a[list(state.members)]
    return float(p @ rows.sum(axis=1) / a.shape[0])


def init_population(matrix, k: int, allocation: str = "uniform") -> PopulationState:
    """The ``k`` pure strategies with the lowest win-rate, weakest (oldest) first.

    Win-rate ties go to the lower index.
    """
    a = as_payoff_array(matrix)
    m = a.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"population size k={k} must lie in 1..{m}")
    wins = ts_strategy_winrate(a) if m > 1 else np.zeros(1)
    order = np.lexsort((np.arange(m), wins))
    members = tuple(int(s) for s in order[:k])
    state = PopulationState(members, k, 0, _allocation(a, members, allocation))
    return replace(state, trace=((0, wr_performance(state, a)),))


def step(state: PopulationState, matrix, allocation: str = "uniform", *,
         winrates=None, record: bool = True):
    """One replacement: the oldest member makes way for the weakest outside
    strategy that beats the population on (unweighted) average.

    Returns :data:`CONVERGED` when no outside strategy qualifies. ``winrates``
    may carry precomputed per-strategy win-rates; ``record=False`` skips
    extending the trace (long runs keep their own).
    """
    a = as_payoff_array(matrix)
    m = a.shape[0]
    members = list(state.members)
    outside = np.ones(m, dtype=bool)
    outside[members] = False
    totals = a[:, members].sum(axis=1)
    candidates = np.flatnonzero(outside & (totals > 0))
    if candidates.size == 0:
        return CONVERGED
    wins = ts_strategy_winrate(a) if winrates is None else winrates
    pick = int(candidates[np.lexsort((candidates, wins[candidates]))[0]])
    assert totals[pick] > 0

    new_members = tuple(members[1:] + [pick])
    new = PopulationState(new_members, state.k, state.t + 1,
                          _allocation(a, new_members, allocation))
    if not record:
        return new
    return replace(new, trace=state.trace + ((new.t, wr_performance(new, a)),))


@dataclass
class FictitiousPlayResult:
    k: int
    trace: list[tuple[int, float]] = field(default_factory=list)
    populations: list[tuple[int, ...]] = field(default_factory=list)
    converged: bool = False
    error: Exception | None = None

    @property
    def final_wr(self) -> float:
        return self.trace[-1][1] if self.trace else float("nan")


def default_max_iters(m: int) -> int:
    return 4 * m * m


def run_single(matrix, k: int, max_iters: int | None = None,
               allocation: str = "uniform") -> FictitiousPlayResult:
    a = as_payoff_array(matrix)
    if max_iters is None:
        max_iters = default_max_iters(a.shape[0])
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    wins = ts_strategy_winrate(a) if a.shape[0] > 1 else np.zeros(1)
    state = init_population(a, k, allocation)
    result = FictitiousPlayResult(k, list(state.trace), [state.members])
    for _ in range(max_iters):
        nxt = step(state, a, allocation, winrates=wins, record=False)
        if nxt is CONVERGED:
            result.converged = True
            break
        state = nxt
        result.trace.append((state.t, wr_performance(state, a)))
        result.populations.append(state.members)
    return result


def run_fictitious_play(matrix, k_values, max_iters: int | None = None,
                        allocation: str = "uniform") -> dict[int, FictitiousPlayResult]:
    """Run fixed-memory fictitious play for each population size.

    A failing ``k`` records its exception on the result and does not stop the others.
    """
    a = as_payoff_array(matrix)
    out: dict[int, FictitiousPlayResult] = {}
    for k in k_values:
        try:
            out[k] = run_single(a, k, max_iters, allocation)
        except (ValueError, RuntimeError) as err:
            logger.error("fictitious play with k=%s failed: %s", k, err)
            out[k] = FictitiousPlayResult(k, error=err)
    return out


class FixedMemoryFictitiousPlay(BaseEstimator):
    """Estimator form of :func:`run_single`; ``fit`` takes the payoff matrix."""

    def __init__(self, k=1, max_iters=None, allocation="uniform"):
        self.k = k
        self.max_iters = max_iters
        self.allocation = allocation

    def fit(self, X, y=None):
        res = run_single(X, self.k, self.max_iters, self.allocation)
        self.trace_ = np.array(res.trace)
        self.wr_ = self.trace_[:, 1]
        self.population_ = res.populations[-1]
        self.converged_ = res.converged
        self.n_iter_ = len(res.populations) - 1
        return self
