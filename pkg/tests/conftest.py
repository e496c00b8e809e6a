import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spintop.ingest import GameRecord, Outcome  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"

RPS = np.array([[0, 1, -1], [-1, 0, 1], [1, -1, 0]], dtype=float)


def transitive(m: int, margin: float = 0.5) -> np.ndarray:
    """Strategy 0 strongest; every i beats every j > i by ``margin``."""
    u = np.triu(np.full((m, m), margin), 1)
    return u - u.T


def block_game() -> np.ndarray:
    """RPS block over {0, 1, 2}; each block member beats the lone strategy 3."""
    a = np.zeros((4, 4))
    a[:3, :3] = RPS
    a[:3, 3] = 0.5
    a[3, :3] = -0.5
    return a


def simulate_records(n: int, seed: int = 0, spread: float = 120.0) -> list[GameRecord]:
    """Elo-model games between nearby-rated players."""
    rng = np.random.default_rng(seed)
    white = rng.normal(1500, 350, n)
    black = white + rng.normal(0, spread, n)
    keep = (white > 0) & (black > 0)
    white, black = white[keep].round(), black[keep].round()
    p = 1 / (1 + 10 ** (-(white - black) / 400))
    draw = rng.random(white.size) < 0.08
    out = np.where(draw, 0, np.where(rng.random(white.size) < p, 1, -1))
    return [GameRecord(int(w), int(b), Outcome(int(o)), "sim")
            for w, b, o in zip(white, black, out)]


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def sim_records_100k():
    return simulate_records(100_000, seed=11)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(VERDICTS):
        verdict, title = VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {verdict:4s} {title}")
