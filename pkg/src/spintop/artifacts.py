"""Reading and writing pipeline artifacts.

CSV files are plain comma-separated tables with a header row. Provenance
(config, config hash, creation time) sits in leading ``#`` comment lines, one
``# key: <json>`` per line; ``pandas.read_csv(..., comment="#")`` skips them.
JSON artifacts carry the same block under ``"meta"``.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

import numpy as np

from . import __version__
from .ingest import GameRecord, Outcome
from .payoff import BinScheme, PayoffMatrix

TIMESTAMP_KEY = "created"


def make_meta(config=None, **extra) -> dict:
    meta = {"tool": "spintop", "version": __version__}
    if config is not None:
        meta["config"] = config.to_dict()
        meta["config_hash"] = config.hash()
    meta.update(extra)
    meta[TIMESTAMP_KEY] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return meta


def _atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_csv(path, header: list[str], rows: Iterable, meta: dict | None = None) -> None:
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write(path, buf.getvalue())


def read_csv(path) -> tuple[dict, list[str], list[list[str]]]:
    meta: dict = {}
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body_start = 0
    for i, line in enumerate(lines):
        if not line.startswith("#"):
            body_start = i
            break
        key, _, value = line[1:].strip().partition(":")
        meta[key.strip()] = json.loads(value)
    else:
        body_start = len(lines)
    rows = list(csv.reader(lines[body_start:]))
    if not rows:
        return meta, [], []
    return meta, rows[0], rows[1:]


def write_json(path, payload: dict, meta: dict | None = None) -> None:
    doc = {"meta": meta or {}, **payload}
    _atomic_write(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def read_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


# records ---------------------------------------------------------------------

RECORD_HEADER = ["white_elo", "black_elo", "outcome", "source_tag"]


def write_records(path, records: Iterable[GameRecord], meta: dict | None = None) -> int:
    rows = [(r.white_rating, r.black_rating, int(r.outcome), r.source_tag) for r in records]
    write_csv(path, RECORD_HEADER, rows, meta)
    return len(rows)


def read_records(path) -> tuple[dict, list[GameRecord]]:
    meta, header, rows = read_csv(path)
    if rows and header != RECORD_HEADER:
        raise ValueError(f"{path}: unexpected record header {header}")
    recs = [GameRecord(int(w), int(b), Outcome(int(o)), tag) for w, b, o, tag in rows]
    return meta, recs


# payoff ----------------------------------------------------------------------

def write_payoff_csv(path, payoff: PayoffMatrix, meta: dict | None = None) -> None:
    meta = dict(meta or {})
    if payoff.scheme is not None:
        meta["scheme_edges"] = payoff.scheme.to_dict()["edges"]
    meta["skipped_count"] = int(payoff.skipped_count)
    if payoff.fill_mask is not None:
        meta["fill_mask_bits"] = np.packbits(payoff.fill_mask).tobytes().hex()
    mids = payoff.midpoints
    write_csv(path, [repr(float(x)) for x in mids], payoff.entries.tolist(), meta)


def read_payoff_csv(path) -> PayoffMatrix:
    meta, header, rows = read_csv(path)
    entries = np.array([[float(v) for v in row] for row in rows])
    scheme = None
    if "scheme_edges" in meta:
        scheme = BinScheme(np.asarray(meta["scheme_edges"], dtype=float))
    elif len(header) >= 2:
        mids = np.array([float(h) for h in header])
        half = np.diff(mids).mean() / 2
        scheme = BinScheme(np.concatenate([mids - half, [mids[-1] + half]]))
    mask = None
    if "fill_mask_bits" in meta:
        bits = np.frombuffer(bytes.fromhex(meta["fill_mask_bits"]), dtype=np.uint8)
        mask = np.unpackbits(bits, count=entries.size).astype(bool).reshape(entries.shape)
    return PayoffMatrix(entries, mask, scheme, int(meta.get("skipped_count", 0)))


def write_payoff_json(path, payoff: PayoffMatrix, meta: dict | None = None) -> None:
    write_json(path, payoff.to_dict(), meta)


def read_payoff_json(path) -> PayoffMatrix:
    return PayoffMatrix.from_dict(read_json(path))


def read_payoff(path) -> PayoffMatrix:
    path = Path(path)
    if path.suffix.lower() == ".json":
        return read_payoff_json(path)
    return read_payoff_csv(path)
