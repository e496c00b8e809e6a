"""Measure the transitive and cyclic structure of rated two-player games."""

__version__ = "0.1.0"

from .cycles import rps_cycle_counts, to_adjacency, total_cycles  # noqa: E402
from .dynamics import FixedMemoryFictitiousPlay, run_fictitious_play, run_single  # noqa: E402
from .equilibrium import (  # noqa: E402
    Clustering,
    MixedStrategy,
    NashClustering,
    SolverError,
    cluster_profile,
    nash_clustering,
    npp,
    rpp,
    solve_maxent_ne,
    ts_cluster_elo,
    ts_cluster_winrate,
    ts_strategy_winrate,
)
from .fitting import (  # noqa: E402
    LinearRatingMap,
    SkewNormalRegressor,
    elo_histogram,
    fit_linear_map,
    fit_rating_maps,
    fit_skew_normal,
)
from .ingest import GameRecord, Outcome, SamplePlan, parse_archive, sample_archive_by_month  # noqa: E402
from .payoff import (  # noqa: E402
    BinScheme,
    EloBinner,
    PayoffMatrix,
    PayoffMatrixBuilder,
    build_payoff_matrix,
    make_bin_scheme,
)
from .synthetic import SyntheticSpec, generate_synthetic  # noqa: E402

__all__ = [
    "BinScheme", "Clustering", "EloBinner", "FixedMemoryFictitiousPlay", "GameRecord",
    "LinearRatingMap", "MixedStrategy", "NashClustering", "Outcome", "PayoffMatrix",
    "PayoffMatrixBuilder", "SamplePlan", "SkewNormalRegressor", "SolverError",
    "SyntheticSpec", "build_payoff_matrix", "cluster_profile", "elo_histogram",
    "fit_linear_map", "fit_rating_maps", "fit_skew_normal", "generate_synthetic",
    "make_bin_scheme", "nash_clustering", "npp", "parse_archive", "rps_cycle_counts",
    "rpp", "run_fictitious_play", "run_single", "sample_archive_by_month",
    "solve_maxent_ne", "to_adjacency", "total_cycles", "ts_cluster_elo",
    "ts_cluster_winrate", "ts_strategy_winrate",
]
