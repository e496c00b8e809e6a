"""Streaming PGN header extraction and two-stage uniform sampling."""

from __future__ import annotations

import enum
import logging
import math
import random
import re
from collections import Counter
from dataclasses import dataclass, field
from itertools import islice
from typing import IO, Iterable, Iterator, Sequence, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")

DEFAULT_QUOTA = 120_000
DEFAULT_CHUNK_SIZE = 1_000_000

_TAG_LINE = re.compile(r'^\[\s*([A-Za-z0-9_]+)\s+"((?:[^"\\]|\\.)*)"\s*\]\s*$')
_RESULTS = {"1-0": 1, "0-1": -1, "1/2-1/2": 0}
_REQUIRED = ("WhiteElo", "BlackElo", "Result")


class Outcome(enum.IntEnum):
    """Game result, valued as White's score."""

    WHITE_WIN = 1
    DRAW = 0
    BLACK_WIN = -1


@dataclass(frozen=True, slots=True)
class GameRecord:
    white_rating: int
    black_rating: int
    outcome: Outcome
    source_tag: str = ""

    def __post_init__(self):
        if self.white_rating <= 0 or self.black_rating <= 0:
            raise ValueError(
                f"ratings must be positive, got {self.white_rating}/{self.black_rating}"
            )
        if not isinstance(self.outcome, Outcome):
            object.__setattr__(self, "outcome", Outcome(self.outcome))


@dataclass(frozen=True)
class SamplePlan:
    """Per-month sampling budget.

    ``chunk_size`` is the stage-one chunk length; it has to be at least
    ``per_month_quota`` so every full chunk can supply a complete draw.
    """

    per_month_quota: int = DEFAULT_QUOTA
    chunk_size: int = DEFAULT_CHUNK_SIZE
    seed: int = 0

    def __post_init__(self):
        if self.per_month_quota < 1:
            raise ValueError("per_month_quota must be >= 1")
        if self.chunk_size < self.per_month_quota:
            raise ValueError(
                f"chunk_size ({self.chunk_size}) must be >= per_month_quota "
                f"({self.per_month_quota})"
            )
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass
class ParseStats:
    encountered: int = 0
    yielded: int = 0
    skipped: Counter = field(default_factory=Counter)

    @property
    def skipped_total(self) -> int:
        return sum(self.skipped.values())

    def merge(self, other: "ParseStats") -> None:
        self.encountered += other.encountered
        self.yielded += other.yielded
        self.skipped.update(other.skipped)

    def as_dict(self) -> dict:
        return {
            "encountered": self.encountered,
            "yielded": self.yielded,
            "skipped": dict(sorted(self.skipped.items())),
        }


def _parse_rating(value: str) -> int | None:
    # provisional markers ("?", "1500?") and blanks are rejected outright
    if not value.isdigit():
        return None
    rating = int(value)
    return rating if rating > 0 else None


def _finish(tags: dict, malformed: bool, source_tag: str, stats: ParseStats):
    stats.encountered += 1
    if malformed:
        stats.skipped["malformed"] += 1
        return None
    if any(t not in tags for t in _REQUIRED):
        stats.skipped["missing_tag"] += 1
        return None
    outcome = _RESULTS.get(tags["Result"])
    if outcome is None:
        stats.skipped["bad_result"] += 1
        return None
    white = _parse_rating(tags["WhiteElo"])
    black = _parse_rating(tags["BlackElo"])
    if white is None or black is None:
        stats.skipped["bad_rating"] += 1
        return None
    stats.yielded += 1
    return GameRecord(white, black, Outcome(outcome), source_tag)


def parse_archive(
    stream: IO | Iterable,
    source_tag: str = "",
    stats: ParseStats | None = None,
) -> Iterator[GameRecord]:
    """Yield one :class:`GameRecord` per usable game in a PGN stream.

    Only the tag section is inspected; movetext is used solely to find game
    boundaries. Games lacking ``WhiteElo``/``BlackElo``/``Result``, with an
    unfinished result, an unparseable rating, or a broken tag line are skipped
    and tallied by reason in ``stats``.
    """
    if stats is None:
        stats = ParseStats()
    tags: dict[str, str] = {}
    malformed = False
    in_game = False
    seen_moves = False

    for raw in stream:
        line = raw.decode("utf-8", errors="replace") if isinstance(raw, bytes) else raw
        line = line.strip()
        if not line:
            continue
        if line.startswith("["):
            match = _TAG_LINE.match(line)
            # movetext-less games: a repeated tag name also opens a new game
            repeated = match is not None and match.group(1) in tags
            if seen_moves or repeated:
                rec = _finish(tags, malformed, source_tag, stats)
                if rec is not None:
                    yield rec
                tags, malformed, seen_moves = {}, False, False
            in_game = True
            if match is None:
                malformed = True
            else:
                tags[match.group(1)] = match.group(2)
        else:
            if line.startswith("%") or line.startswith(";"):
                continue
            in_game = True
            seen_moves = True

    if in_game:
        rec = _finish(tags, malformed, source_tag, stats)
        if rec is not None:
            yield rec


def _uniform_open(rng: random.Random) -> float:
    u = rng.random()
    while u == 0.0:
        u = rng.random()
    return u


def reservoir_sample(items: Iterable[T], d: int, rng: random.Random) -> list[T]:
    """Uniform ``d``-subset of a stream in one pass (Li's Algorithm L).

    Returns every item when the stream is shorter than ``d``.
    """
    it = iter(items)
    reservoir = list(islice(it, d))
    if len(reservoir) < d:
        return reservoir
    w = math.exp(math.log(_uniform_open(rng)) / d)
    while True:
        if w >= 1.0:
            skip = 0
        else:
            skip = int(math.log(_uniform_open(rng)) / math.log1p(-w))
        nxt = next(islice(it, skip, skip + 1), _SENTINEL)
        if nxt is _SENTINEL:
            return reservoir
        reservoir[rng.randrange(d)] = nxt
        w *= math.exp(math.log(_uniform_open(rng)) / d)


_SENTINEL = object()


def _chunks(it: Iterator[T], size: int) -> Iterator[list[T]]:
    while True:
        chunk = list(islice(it, size))
        if not chunk:
            return
        yield chunk


def _two_stage(universe: Iterable[T], d: int, h: int, rng: random.Random):
    indexed = enumerate(universe)
    pool: list[tuple[int, T]] = []
    m = 0
    for chunk in _chunks(indexed, h):
        m += len(chunk)
        # a short trailing chunk contributes min(d, len(chunk)) draws
        pool.extend(reservoir_sample(chunk, d, rng))
    if len(pool) <= d:
        picked = pool
    else:
        picked = rng.sample(pool, d)
    picked.sort(key=lambda pair: pair[0])
    return [item for _, item in picked], m


def two_stage_sample(
    universe: Iterable[T],
    d: int,
    plan: SamplePlan,
    rng: random.Random | None = None,
) -> list[T]:
    """Draw ``d`` items uniformly from ``universe`` in two stages.

    The universe is cut into consecutive chunks of ``plan.chunk_size``; ``d``
    items are drawn from each chunk, then ``d`` from the pooled draws. When the
    universe length is a multiple of the chunk size every item is included with
    probability ``d / m``. Items come back in stream order.
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    if plan.chunk_size < d:
        raise ValueError(f"chunk_size ({plan.chunk_size}) must be >= d ({d})")
    if rng is None:
        rng = random.Random(plan.seed)
    sample, m = _two_stage(universe, d, plan.chunk_size, rng)
    if m < d:
        raise ValueError(f"sample larger than universe (d={d}, m={m})")
    return sample


def month_rng(seed: int, month_id: str) -> random.Random:
    """Independent, reproducible stream per month so months can run in any order."""
    return random.Random(f"{seed}:{month_id}")


def sample_archive_by_month(
    archives: Sequence[tuple[str, IO | Iterable]],
    plan: SamplePlan,
    stats: ParseStats | None = None,
) -> list[GameRecord]:
    """Sample ``plan.per_month_quota`` games from every month.

    Months are emitted in chronological (sorted month-id) order. A month with
    fewer usable games than the quota contributes all of them and logs a warning.
    """
    if not archives:
        raise ValueError("no archives given")
    if stats is None:
        stats = ParseStats()
    out: list[GameRecord] = []
    for month_id, stream in sorted(archives, key=lambda a: a[0]):
        month_stats = ParseStats()
        records = parse_archive(stream, source_tag=month_id, stats=month_stats)
        sample, m = _two_stage(
            records, plan.per_month_quota, plan.chunk_size, month_rng(plan.seed, month_id)
        )
        if m < plan.per_month_quota:
            logger.warning(
                "month %s has %d usable games, below quota %d; keeping all",
                month_id, m, plan.per_month_quota,
            )
        stats.merge(month_stats)
        out.extend(sample)
    return out
