"""Command-line pipeline: archives -> records -> payoff -> clusters, cycles, dynamics, fits.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 solver error.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import artifacts as io
from ._validation import is_unimodal
from .config import ConfigError, PipelineConfig
from .cycles import rps_cycle_counts, to_adjacency, total_cycles
from .dynamics import default_max_iters, run_fictitious_play
from .equilibrium import SolverError, cluster_profile, nash_clustering
from .fitting import (
    RATING_SYSTEMS,
    check_composition,
    elo_histogram,
    fit_rating_maps,
    fit_skew_normal,
)
from .ingest import ParseStats, SamplePlan, parse_archive, sample_archive_by_month
from .payoff import PayoffMatrix, build_payoff_matrix, make_bin_scheme
from .synthetic import SyntheticSpec, generate_synthetic

logger = logging.getLogger("spintop")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4

_MONTH = re.compile(r"(\d{4}-\d{2})")

__all__ = ["main", "build_parser", "generate_synthetic", "SyntheticSpec"]


class DataError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as err:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from err


def _common_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="YAML or JSON config file; flags override it")
    p.add_argument("--out-dir")
    p.add_argument("--bin-width", type=float)
    p.add_argument("--bin-range", type=float, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--quota", type=int, help="games sampled per month")
    p.add_argument("--chunk-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--k-list", type=_int_list, help="population sizes, e.g. 1,5,10")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--allocation", choices=("uniform", "nash"))
    p.add_argument("--tol", type=float, help="equilibrium feasibility tolerance")
    p.add_argument("--support-threshold", type=float)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="spintop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="parse PGN archives into a record file")
    p.add_argument("inputs", nargs="*", help="decompressed PGN files ('-' for stdin)")

    p = sub.add_parser("sample", parents=[common],
                       help="two-stage per-month sample of PGN archives")
    p.add_argument("inputs", nargs="*",
                   help="MONTH=PATH pairs, or paths whose name contains YYYY-MM")

    p = sub.add_parser("analyze", parents=[common],
                       help="payoff matrix, Nash clusters, cycles, histogram and fits")
    p.add_argument("inputs", nargs="*", help="record CSV files")
    p.add_argument("--rpp", action="store_true", default=None,
                   help="also compute RPP cluster win-rates (one LP per cluster pair)")

    p = sub.add_parser("cycles", parents=[common], help="RPS cycle counts of a payoff matrix")
    p.add_argument("payoff", help="payoff CSV or JSON")

    p = sub.add_parser("fplay", parents=[common], help="fixed-memory fictitious play traces")
    p.add_argument("payoff", help="payoff CSV or JSON")

    p = sub.add_parser("fit-ratings", parents=[common],
                       help="linear maps between rating systems")
    p.add_argument("table", nargs="?", help="CSV with columns lichess,uscf,fide "
                   "(blank = missing); defaults to the bundled synthetic table")

    p = sub.add_parser("synth", parents=[common], help="layered synthetic payoff matrix")
    p.add_argument("--layers", type=_int_list, required=True, help="sizes, strongest first")
    p.add_argument("--intra", choices=("rps_like", "draws"), default="rps_like")
    p.add_argument("--margin", type=float, default=0.5)
    return parser


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig()
    inputs = getattr(args, "inputs", None) or None
    return cfg.updated(
        inputs=inputs, out_dir=args.out_dir, bin_width=args.bin_width,
        bin_range=args.bin_range, quota=args.quota, chunk_size=args.chunk_size,
        seed=args.seed, k_list=args.k_list, max_iters=args.max_iters,
        allocation=args.allocation, tol=args.tol,
        support_threshold=args.support_threshold, rpp=getattr(args, "rpp", None),
    )


def _open_input(path: str):
    if path == "-":
        return sys.stdin.buffer
    p = Path(path)
    if not p.is_file():
        raise DataError(f"input not found: {path}")
    return p.open("rb")


def _write_skip_report(out: Path, stats: ParseStats, meta: dict) -> None:
    io.write_json(out / "skip_report.json", stats.as_dict(), meta)


def cmd_ingest(cfg: PipelineConfig, args) -> int:
    if not cfg.inputs:
        raise ConfigError("ingest needs at least one input path")
    out = Path(cfg.out_dir)
    stats = ParseStats()
    records = []
    for path in cfg.inputs:
        fh = _open_input(path)
        try:
            records.extend(parse_archive(fh, source_tag=Path(path).stem, stats=stats))
        finally:
            if fh is not sys.stdin.buffer:
                fh.close()
    if not records:
        logger.warning("no usable games found in %s", ", ".join(cfg.inputs))
    meta = io.make_meta(cfg, records_hash="unsampled")
    n = io.write_records(out / "records.csv", records, meta)
    _write_skip_report(out, stats, meta)
    logger.info("wrote %d records (%d skipped)", n, stats.skipped_total)
    return EXIT_OK


def _month_inputs(inputs: list[str]) -> list[tuple[str, str]]:
    pairs = []
    for item in inputs:
        if "=" in item:
            month, path = item.split("=", 1)
        else:
            found = _MONTH.search(Path(item).name)
            month, path = (found.group(1) if found else Path(item).stem), item
        pairs.append((month, path))
    months = [m for m, _ in pairs]
    if len(set(months)) != len(months):
        raise ConfigError(f"duplicate month ids among inputs: {months}")
    return pairs


def cmd_sample(cfg: PipelineConfig, args) -> int:
    if not cfg.inputs:
        raise ConfigError("sample needs at least one input path")
    try:
        plan = SamplePlan(cfg.quota, cfg.chunk_size, cfg.seed)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    out = Path(cfg.out_dir)
    handles = [(month, _open_input(path)) for month, path in _month_inputs(cfg.inputs)]
    stats = ParseStats()
    try:
        records = sample_archive_by_month(handles, plan, stats)
    finally:
        for _, fh in handles:
            if fh is not sys.stdin.buffer:
                fh.close()
    meta = io.make_meta(cfg, records_hash=cfg.sampling_hash)
    n = io.write_records(out / "records.csv", records, meta)
    _write_skip_report(out, stats, meta)
    logger.info("sampled %d records from %d months", n, len(handles))
    return EXIT_OK


def _load_records(paths: list[str]):
    records, hashes = [], {}
    for path in paths:
        if not Path(path).is_file():
            raise DataError(f"record file not found: {path}")
        try:
            meta, recs = io.read_records(path)
        except (ValueError, KeyError) as err:
            raise DataError(f"cannot read records from {path}: {err}") from err
        hashes[path] = meta.get("records_hash")
        records.extend(recs)
    if len(set(hashes.values())) > 1:
        raise ConfigError(f"record files come from different sampling configs: {hashes}")
    return records


def _try_fit(points, label):
    pts = np.asarray(points, dtype=float)
    try:
        fit = fit_skew_normal(pts)
    except (ValueError, RuntimeError) as err:
        logger.warning("skipping %s fit: %s", label, err)
        return {"error": str(err), "points": pts.tolist()}
    lo, hi = pts[:, 0].min(), pts[:, 0].max()
    grid = np.linspace(lo, hi, 512)
    return {**fit.to_dict(), "unimodal": is_unimodal(fit(grid), atol=1e-12),
            "points": pts.tolist()}


def _cycles_rows(payoff: PayoffMatrix, counts):
    return [(float(x), int(c)) for x, c in zip(payoff.midpoints, counts)]


def cmd_analyze(cfg: PipelineConfig, args) -> int:
    if not cfg.inputs:
        raise ConfigError("analyze needs at least one record file")
    records = _load_records(cfg.inputs)
    try:
        scheme = make_bin_scheme(cfg.bin_range, cfg.bin_width)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    try:
        payoff = build_payoff_matrix(records, scheme)
    except ValueError as err:
        raise DataError(str(err)) from err

    out = Path(cfg.out_dir)
    meta = io.make_meta(cfg, scheme_hash=cfg.hash(("bin_range", "bin_width")))
    io.write_payoff_csv(out / "payoff.csv", payoff, meta)
    io.write_payoff_json(out / "payoff.json", payoff, meta)

    counts = rps_cycle_counts(to_adjacency(payoff))
    total = total_cycles(counts)
    io.write_csv(out / "cycles.csv", ["bin_midpoint", "cycle_count"],
                 _cycles_rows(payoff, counts), {**meta, "total_cycles": total})

    hist, overflow = elo_histogram(records, scheme)
    io.write_csv(out / "histogram.csv", ["bin_lower", "bin_upper", "bin_midpoint", "count"],
                 [(b.lower, b.upper, b.midpoint, int(c)) for b, c in zip(scheme.bins, hist)],
                 {**meta, "out_of_range": overflow})

    # outputs above survive a solver failure below
    clustering = nash_clustering(payoff, support_threshold=cfg.support_threshold,
                                 tol=cfg.tol, max_iter=cfg.max_solver_iter)
    profile = cluster_profile(clustering, scheme)
    rpp_win = cluster_profile(clustering, scheme, "rpp").ts_winrate if cfg.rpp else None
    clusters = []
    for k, c in enumerate(clustering.clusters):
        on = np.isin(c.ne.index, c.members)
        entry = {
            "ordinal": c.ordinal,
            "member_bin_indices": c.members.tolist(),
            "member_midpoints": scheme.midpoints[c.members].tolist(),
            "ne_probabilities": c.ne.probabilities[on].tolist(),
            "size": c.size,
            "ts_elo": float(profile.ts_elo[k]),
            "ts_winrate": float(profile.ts_winrate[k]),
        }
        if rpp_win is not None:
            entry["ts_winrate_rpp"] = float(rpp_win[k])
        clusters.append(entry)
    npp_m = profile.npp
    upper = npp_m[np.triu_indices(len(clustering))]
    io.write_json(out / "clustering.json", {
        "scheme": scheme.to_dict(),
        "n_strategies": payoff.m,
        "clusters": clusters,
        "order_by_ts_elo": [int(i) + 1 for i in np.argsort(-profile.ts_elo, kind="stable")],
        "order_by_ts_winrate": [int(i) + 1 for i in
                                np.argsort(-profile.ts_winrate, kind="stable")],
        "npp_violations": int((upper < -1e-8).sum()),
    }, meta)
    ordinals = [str(c.ordinal) for c in clustering.clusters]
    io.write_csv(out / "npp.csv", ["cluster"] + ordinals,
                 [[o] + row for o, row in zip(ordinals, npp_m.tolist())], meta)

    io.write_json(out / "fit.json", {
        "nash_clusters": _try_fit(np.column_stack([profile.ts_elo, profile.sizes]),
                                  "cluster-size"),
        "rps_cycles": _try_fit(np.column_stack([payoff.midpoints, counts]), "cycle-count"),
        "histogram_peak": float(scheme.midpoints[int(np.argmax(hist))]),
    }, meta)
    logger.info("%d strategies, %d clusters, %d RPS cycles", payoff.m, len(clustering), total)
    return EXIT_OK


def _read_payoff(path: str) -> PayoffMatrix:
    if not Path(path).is_file():
        raise DataError(f"payoff file not found: {path}")
    try:
        return io.read_payoff(path)
    except (ValueError, KeyError) as err:
        raise DataError(f"cannot read payoff from {path}: {err}") from err


def cmd_cycles(cfg: PipelineConfig, args) -> int:
    payoff = _read_payoff(args.payoff)
    counts = rps_cycle_counts(to_adjacency(payoff))
    total = total_cycles(counts)
    io.write_csv(Path(cfg.out_dir) / "cycles.csv", ["bin_midpoint", "cycle_count"],
                 _cycles_rows(payoff, counts), {**io.make_meta(cfg), "total_cycles": total})
    return EXIT_OK


def cmd_fplay(cfg: PipelineConfig, args) -> int:
    payoff = _read_payoff(args.payoff)
    a = payoff.entries
    max_iters = cfg.max_iters or default_max_iters(payoff.m)
    results = run_fictitious_play(payoff, cfg.k_list, max_iters, cfg.allocation)
    top = float(a.sum(axis=1).max() / payoff.m)
    mids = payoff.midpoints
    out, meta = Path(cfg.out_dir), io.make_meta(cfg)
    summary = {}
    for k, res in results.items():
        if res.error is not None:
            summary[str(k)] = {"error": str(res.error)}
            continue
        rows = [(t, wr, ";".join(repr(float(mids[s])) for s in pop))
                for (t, wr), pop in zip(res.trace, res.populations)]
        io.write_csv(out / f"trace_k{k}.csv",
                     ["iteration", "wr", "population_member_midpoints"], rows, meta)
        summary[str(k)] = {"converged": res.converged, "iterations": len(res.trace) - 1,
                           "final_wr": res.final_wr,
                           "reached_top": abs(res.final_wr - top) <= 1e-6}
    io.write_json(out / "fplay_summary.json",
                  {"top_wr": top, "max_iters": max_iters, "runs": summary}, meta)
    failed = [k for k, r in results.items() if r.error is not None]
    if failed:
        logger.error("fictitious play failed for k in %s", failed)
        return EXIT_DATA
    return EXIT_OK


def bundled_rating_table() -> Path:
    return Path(str(resources.files("spintop") / "data" / "rating_map_synthetic.csv"))


def read_rating_table(path) -> dict[str, np.ndarray]:
    _, header, rows = io.read_csv(path)
    missing = set(RATING_SYSTEMS) - set(header)
    if missing:
        raise DataError(f"{path}: missing rating columns {sorted(missing)}")
    cols = {name: header.index(name) for name in RATING_SYSTEMS}
    return {name: np.array([float(r[i]) if r[i].strip() else np.nan for r in rows])
            for name, i in cols.items()}


def cmd_fit_ratings(cfg: PipelineConfig, args) -> int:
    path = args.table or bundled_rating_table()
    if not Path(path).is_file():
        raise DataError(f"rating table not found: {path}")
    table = read_rating_table(path)
    try:
        maps = fit_rating_maps(table)
    except ValueError as err:
        raise DataError(str(err)) from err
    lich = table["lichess"][np.isfinite(table["lichess"])]
    check = check_composition(maps, np.linspace(lich.min(), lich.max(), 200))
    io.write_json(Path(cfg.out_dir) / "rating_maps.json", {
        "maps": {name: m.to_dict() for name, m in maps.items()},
        "composition": {"lichess->uscf->fide": check.composed.to_dict(),
                        "max_gap": check.max_gap, "tolerance": check.tolerance,
                        "consistent": check.consistent},
    }, io.make_meta(cfg, table=str(path)))
    return EXIT_OK


def cmd_synth(cfg: PipelineConfig, args) -> int:
    try:
        spec = SyntheticSpec(tuple(args.layers), args.intra, args.margin)
    except ValueError as err:
        raise ConfigError(str(err)) from err
    payoff = generate_synthetic(spec, cfg.seed)
    out, meta = Path(cfg.out_dir), io.make_meta(cfg, synthetic=payoff.meta["synthetic"])
    io.write_payoff_csv(out / "synthetic_payoff.csv", payoff, meta)
    io.write_payoff_json(out / "synthetic_payoff.json", payoff, meta)
    return EXIT_OK


COMMANDS = {
    "ingest": cmd_ingest, "sample": cmd_sample, "analyze": cmd_analyze,
    "cycles": cmd_cycles, "fplay": cmd_fplay, "fit-ratings": cmd_fit_ratings,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as err:
        logger.error("%s", err)
        return EXIT_CONFIG
    except (DataError, OSError) as err:
        logger.error("%s", err)
        return EXIT_DATA
    except SolverError as err:
        logger.error("solver failed: %s", err)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
