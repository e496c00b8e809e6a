"""Maximum-entropy symmetric Nash equilibria and Nash clustering.

Convention: ``M[i, j]`` is the payoff of pure strategy ``i`` against ``j``. A
distribution ``p`` is a symmetric equilibrium of the zero-sum game exactly when
no pure strategy beats it, ``M @ p <= 0``.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.special import logsumexp, softmax
from sklearn.base import BaseEstimator, ClusterMixin

from ._validation import as_payoff_array, check_index_set
from .payoff import BinScheme, PayoffMatrix

logger = logging.getLogger(__name__)

SUPPORT_THRESHOLD = 1e-6
FEASIBILITY_TOL = 1e-8
TIE_TOL = 1e-9
MAX_ITER = 100_000


class SolverError(RuntimeError):
    """Equilibrium solve failed; carries the best iterate found."""

    def __init__(self, message, best_iterate=None, kkt_residual=None, residual_set=None):
        super().__init__(message)
        self.best_iterate = best_iterate
        self.kkt_residual = kkt_residual
        self.residual_set = residual_set


@dataclass(eq=False)
class MixedStrategy:
    """Distribution over the strategies listed in ``index``."""

    probabilities: np.ndarray
    index: np.ndarray | None = None
    support_threshold: float = SUPPORT_THRESHOLD
    kkt_residual: float = 0.0

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("probabilities must be a non-empty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("probabilities must be non-negative and sum to 1")
        self.probabilities = p
        self.index = np.arange(p.size) if self.index is None else np.asarray(self.index)
        if self.index.shape != p.shape:
            raise ValueError("index and probabilities differ in length")

    @property
    def support(self) -> np.ndarray:
        """Strategy indices (in ``index`` terms) carrying more than the threshold."""
        return self.index[self.probabilities > self.support_threshold]

    @property
    def entropy(self) -> float:
        p = self.probabilities[self.probabilities > 0]
        return float(-(p * np.log(p)).sum())

    def padded(self, m: int) -> np.ndarray:
        out = np.zeros(m)
        out[self.index] = self.probabilities
        return out


def _max_support(a: np.ndarray) -> np.ndarray:
    """Union of the supports of all symmetric equilibria.

    The equilibria, scaled freely, form the cone ``{q >= 0, a q <= 0}``, which
    is closed under addition. Maximising ``sum(min(q_j, 1))`` over it therefore
    saturates every coordinate that any equilibrium can make positive.
    """
    n = a.shape[0]
    eye = np.eye(n)
    a_ub = np.block([[a, np.zeros((n, n))], [-eye, eye]])
    c = np.concatenate([np.zeros(n), -np.ones(n)])
    bounds = [(0, None)] * n + [(0, 1)] * n
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(2 * n), bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        raise SolverError(f"support LP failed: {res.message}")
    support = res.x[n:] > 0.5
    if not support.any():
        raise SolverError("support LP returned an empty support")
    return support


def _dual(theta, c):
    z = -(c.T @ theta)
    return logsumexp(z), softmax(z)


def _newton_polish(c, theta, tol, max_steps=100):
    """Drive ``c @ p`` to zero for the equality-constrained entropy dual."""
    f, p = _dual(theta, c)
    for _ in range(max_steps):
        g = -(c @ p)
        if np.abs(g).max() <= tol:
            break
        cov = np.diag(p) - np.outer(p, p)
        h = c @ cov @ c.T
        step = -np.linalg.lstsq(h, g, rcond=1e-13)[0]
        slope = g @ step
        if slope >= 0:
            break
        t = 1.0
        for _ in range(60):
            f_new, p_new = _dual(theta + t * step, c)
            if f_new <= f + 1e-4 * t * slope:
                break
            t *= 0.5
        else:
            break
        theta = theta + t * step
        f, p = f_new, p_new
    return theta, p


def _maxent_on_support(a, support, tol, max_iter):
    """Max-entropy point with support exactly ``support``.

    Rows of supported strategies are equalities (any equilibrium with full
    support on ``support`` makes them tight); the remaining rows are the
    inequalities ``a[r] @ p <= 0`` with non-negative multipliers.
    """
    n = a.shape[0]
    s_idx = np.flatnonzero(support)
    r_idx = np.flatnonzero(~support)
    rows = np.concatenate([s_idx, r_idx])
    c = a[np.ix_(rows, s_idx)]
    n_eq = s_idx.size
    bounds = [(None, None)] * n_eq + [(0, None)] * r_idx.size

    res = minimize(
        lambda th: (lambda f, p: (f, -(c @ p)))(*_dual(th, c)),
        np.zeros(rows.size), jac=True, method="L-BFGS-B", bounds=bounds,
        options={"maxiter": max_iter, "maxfun": 2 * max_iter,
                 "ftol": 1e-16, "gtol": 1e-13},
    )
    theta = res.x
    _, p = _dual(theta, c)
    slack = c @ p

    scale = max(1.0, float(np.abs(a).max()))
    active = np.ones(rows.size, dtype=bool)
    active[n_eq:] = (theta[n_eq:] > 1e-10) | (slack[n_eq:] > -1e-7 * scale)

    for _ in range(10):
        th_a, p = _newton_polish(c[active], theta[active], 1e-13 * scale)
        theta = np.zeros(rows.size)
        theta[active] = th_a
        slack = c @ p
        ineq = np.arange(rows.size) >= n_eq
        wrong_sign = active & ineq & (theta < -1e-9)
        violated = ~active & (slack > tol)
        if not wrong_sign.any() and not violated.any():
            break
        active &= ~wrong_sign
        active |= violated

    full = np.zeros(n)
    full[s_idx] = p
    lam = np.zeros(n)
    lam[rows] = theta
    return full, lam


def _kkt_residual(a, p, lam, support):
    mp = a @ p
    primal = max(0.0, float(mp.max()))
    tight = float(np.abs(mp[support]).max())
    outside = ~support
    dual = float(np.clip(-lam[outside], 0, None).max()) if outside.any() else 0.0
    comp = float(np.abs(lam[outside] * mp[outside]).max()) if outside.any() else 0.0
    return max(primal, tight, dual, comp, abs(p.sum() - 1.0))


def _solve(a: np.ndarray, tol: float, max_iter: int):
    n = a.shape[0]
    if n == 1:
        return np.ones(1), 0.0
    support = _max_support(a)
    p, lam = _maxent_on_support(a, support, tol, max_iter)
    resid = _kkt_residual(a, p, lam, support)
    if float((a @ p).max()) > tol or resid > 1e2 * tol:
        # a spurious support member makes the tight system inconsistent; retry
        # on the coordinates that kept real mass
        shrunk = p > 1e-9 * p.max()
        if shrunk.sum() < support.sum():
            p2, lam2 = _maxent_on_support(a, shrunk, tol, max_iter)
            resid2 = _kkt_residual(a, p2, lam2, shrunk)
            if resid2 < resid:
                p, lam, resid, support = p2, lam2, resid2, shrunk
    if float((a @ p).max()) > tol:
        raise SolverError(
            f"no feasible equilibrium within tolerance (KKT residual {resid:.3g})",
            best_iterate=p, kkt_residual=resid,
        )
    p = np.clip(p, 0, None)
    return p / p.sum(), resid


def solve_maxent_ne(
    matrix,
    index=None,
    *,
    support_threshold: float = SUPPORT_THRESHOLD,
    tol: float = FEASIBILITY_TOL,
    max_iter: int = MAX_ITER,
) -> MixedStrategy:
    """Maximum-entropy symmetric Nash equilibrium of ``matrix`` restricted to ``index``.

    The support is found with one linear program (the union of all equilibrium
    supports); entropy is then maximised on it through its smooth convex dual,
    finished with Newton steps so that ``M p <= tol`` holds tightly.
    """
    a_full = as_payoff_array(matrix)
    idx = check_index_set(index, a_full.shape[0])
    a = a_full[np.ix_(idx, idx)]
    try:
        p, resid = _solve(a, tol, max_iter)
    except SolverError as err:
        err.residual_set = idx
        raise
    return MixedStrategy(p, idx, support_threshold, resid)


@dataclass(eq=False)
class NashCluster:
    members: np.ndarray
    ne: MixedStrategy
    ordinal: int

    @property
    def size(self) -> int:
        return int(self.members.size)


@dataclass(eq=False)
class Clustering:
    """Ordered Nash clusters, strongest first, partitioning all strategies."""

    clusters: list[NashCluster]
    source: np.ndarray
    scheme: BinScheme | None = None
    _npp: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        m = self.source.shape[0]
        seen = np.concatenate([c.members for c in self.clusters]) if self.clusters else []
        if len(seen) != m or not np.array_equal(np.sort(seen), np.arange(m)):
            raise ValueError("clusters do not partition the strategy set")

    def __len__(self):
        return len(self.clusters)

    def __getitem__(self, ordinal: int) -> NashCluster:
        if not 1 <= ordinal <= len(self.clusters):
            raise IndexError(f"cluster ordinal {ordinal} outside 1..{len(self.clusters)}")
        return self.clusters[ordinal - 1]

    @property
    def m(self) -> int:
        return self.source.shape[0]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([c.size for c in self.clusters])

    @property
    def labels(self) -> np.ndarray:
        """0-based cluster position of every strategy (0 is the strongest cluster)."""
        out = np.empty(self.m, dtype=np.int64)
        for k, c in enumerate(self.clusters):
            out[c.members] = k
        return out

    @property
    def ne_matrix(self) -> np.ndarray:
        """Row ``k`` is the residual equilibrium of cluster ``k + 1``, zero-padded."""
        return np.vstack([c.ne.padded(self.m) for c in self.clusters])

    def npp_matrix(self) -> np.ndarray:
        if self._npp is None:
            ne = self.ne_matrix
            self._npp = ne @ self.source @ ne.T
        return self._npp


def nash_clustering(
    matrix,
    *,
    support_threshold: float = SUPPORT_THRESHOLD,
    tol: float = FEASIBILITY_TOL,
    max_iter: int = MAX_ITER,
) -> Clustering:
    """Peel off the support of the residual max-entropy equilibrium until nothing is left."""
    a = as_payoff_array(matrix)
    scheme = matrix.scheme if isinstance(matrix, PayoffMatrix) else None
    m = a.shape[0]
    residual = np.arange(m)
    clusters: list[NashCluster] = []
    while residual.size:
        try:
            ne = solve_maxent_ne(a, residual, support_threshold=support_threshold,
                                 tol=tol, max_iter=max_iter)
        except SolverError as err:
            err.args = (f"{err.args[0]} (residual set of {residual.size} strategies, "
                        f"cluster {len(clusters) + 1})",)
            raise
        members = ne.support
        if members.size == 0:
            members = ne.index[[np.argmax(ne.probabilities)]]
        clusters.append(NashCluster(np.sort(members), ne, len(clusters) + 1))
        residual = np.setdiff1d(residual, members, assume_unique=True)
        logger.debug("cluster %d: %d members, %d left", len(clusters), members.size,
                     residual.size)
    return Clustering(clusters, a, scheme)


def npp(clustering: Clustering, i: int, j: int) -> float:
    """Nash population performance ``p_i^T M p_j`` between clusters (1-based ordinals)."""
    k = len(clustering)
    if not (1 <= i <= k and 1 <= j <= k):
        raise IndexError(f"cluster ordinals must lie in 1..{k}, got ({i}, {j})")
    return float(clustering.npp_matrix()[i - 1, j - 1])


def rpp(matrix, rows, cols) -> float:
    """Value of the zero-sum game where ``rows`` plays against ``cols``."""
    a = as_payoff_array(matrix)
    r = check_index_set(rows, a.shape[0], "row set")
    c = check_index_set(cols, a.shape[0], "column set")
    if np.array_equal(r, c):
        return 0.0
    sub = a[np.ix_(r, c)]
    nr = r.size
    # variables: row mixture x (nr), game value v; maximise v
    obj = np.zeros(nr + 1)
    obj[-1] = -1.0
    a_ub = np.hstack([-sub.T, np.ones((c.size, 1))])
    a_eq = np.concatenate([np.ones(nr), [0.0]])[None, :]
    bounds = [(0, None)] * nr + [(None, None)]
    res = linprog(obj, A_ub=a_ub, b_ub=np.zeros(c.size), A_eq=a_eq, b_eq=[1.0],
                  bounds=bounds, method="highs")
    if res.status != 0:
        raise SolverError(f"RPP linear program failed: {res.message}")
    return float(res.x[-1])


def ts_strategy_winrate(matrix, s=None):
    """Fraction of other pure strategies that ``s`` strictly beats.

    With ``s=None`` the win-rate of every strategy is returned.
    """
    a = as_payoff_array(matrix)
    m = a.shape[0]
    if m < 2:
        raise ValueError("win-rate needs at least two strategies")
    wins = (a > 0).sum(axis=1) / (m - 1)
    return wins if s is None else float(wins[s])


def ts_cluster_winrate(clustering: Clustering, a: int, measure: str = "npp",
                       tau: float = TIE_TOL) -> float:
    """Fraction of the other clusters that cluster ``a`` beats.

    ``measure`` picks the comparison: ``"npp"`` uses the retained residual
    equilibria, ``"rpp"`` solves the restricted zero-sum game per pair.
    """
    k = len(clustering)
    if not 1 <= a <= k:
        raise IndexError(f"cluster ordinal {a} outside 1..{k}")
    if k < 2:
        warnings.warn("a single cluster has no opponents; win-rate taken as 0",
                      stacklevel=2)
        return 0.0
    if measure == "npp":
        row = clustering.npp_matrix()[a - 1]
        beats = [row[i] > tau for i in range(k) if i != a - 1]
    elif measure == "rpp":
        mine = clustering[a].members
        beats = [rpp(clustering.source, mine, clustering[i].members) > tau
                 for i in range(1, k + 1) if i != a]
    else:
        raise ValueError(f"unknown measure {measure!r}")
    return sum(beats) / (k - 1)


def ts_cluster_elo(clustering: Clustering, scheme: BinScheme, k: int) -> float:
    """Mean bin midpoint of the members of cluster ``k``."""
    members = clustering[k].members
    if members.max() >= scheme.m:
        raise ValueError("cluster members do not index into the bin scheme")
    return float(scheme.midpoints[members].mean())


@dataclass
class ClusterProfile:
    sizes: np.ndarray
    ts_elo: np.ndarray
    ts_winrate: np.ndarray
    npp: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.ts_winrate) > 1e-12):
            logger.warning("cluster win-rates are not non-increasing")


def cluster_profile(clustering: Clustering, scheme: BinScheme | None = None,
                    measure: str = "npp") -> ClusterProfile:
    scheme = scheme or clustering.scheme
    k = len(clustering)
    if scheme is None:
        elo = np.full(k, np.nan)
    else:
        elo = np.array([ts_cluster_elo(clustering, scheme, i) for i in range(1, k + 1)])
    if k < 2:
        win = np.zeros(k)
    else:
        win = np.array([ts_cluster_winrate(clustering, i, measure) for i in range(1, k + 1)])
    return ClusterProfile(clustering.sizes, elo, win, clustering.npp_matrix())


class NashClustering(ClusterMixin, BaseEstimator):
    """Nash clustering of a skew-symmetric payoff matrix.

    ``fit`` takes a :class:`PayoffMatrix` or a square array; ``labels_[s]`` is
    the 0-based rank of the cluster holding strategy ``s`` (0 = strongest).
    """

    def __init__(self, support_threshold=SUPPORT_THRESHOLD, tol=FEASIBILITY_TOL,
                 max_iter=MAX_ITER):
        self.support_threshold = support_threshold
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        self.clustering_ = nash_clustering(
            X, support_threshold=self.support_threshold, tol=self.tol,
            max_iter=self.max_iter,
        )
        self.labels_ = self.clustering_.labels
        self.n_clusters_ = len(self.clustering_)
        self.cluster_sizes_ = self.clustering_.sizes
        self.ne_ = self.clustering_.ne_matrix
        self.npp_ = self.clustering_.npp_matrix()
        return self
