"""Layered games of skill with known Nash clusters, for oracles and demos."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .payoff import PayoffMatrix

INTRA_STRUCTURES = ("rps_like", "draws")


@dataclass(frozen=True)
class SyntheticSpec:
    """Layer sizes listed strongest first.

    Layer ``i`` occupies the next ``layer_sizes[i]`` indices, so index 0 sits
    in the strongest layer. Every member of a layer beats every member of any
    later layer by exactly ``margin``.
    """

    layer_sizes: tuple[int, ...]
    intra: str = "rps_like"
    margin: float = 0.5

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        object.__setattr__(self, "layer_sizes", sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError("layer sizes must be positive integers")
        if self.intra not in INTRA_STRUCTURES:
            raise ValueError(f"intra must be one of {INTRA_STRUCTURES}")
        if not 0 < self.margin <= 1:
            raise ValueError("margin must lie in (0, 1]")
        if self.intra == "rps_like" and any(s > 1 and s % 2 == 0 for s in sizes):
            raise ValueError("rps_like layers need odd sizes (balanced cyclic tournament)")

    @property
    def m(self) -> int:
        return sum(self.layer_sizes)

    def layer_slices(self) -> list[slice]:
        edges = np.concatenate([[0], np.cumsum(self.layer_sizes)])
        return [slice(int(lo), int(hi)) for lo, hi in zip(edges[:-1], edges[1:])]


def _cyclic_block(n: int, rng: np.random.Generator) -> np.ndarray:
    # circulant: i beats i+1 .. i+(n-1)/2 (mod n) with offset-dependent weights,
    # so every row sums to zero and the uniform mix is an equilibrium
    block = np.zeros((n, n))
    weights = rng.uniform(0.25, 1.0, size=(n - 1) // 2)
    for i in range(n):
        for d, w in enumerate(weights, start=1):
            j = (i + d) % n
            block[i, j] = w
            block[j, i] = -w
    return block


def generate_synthetic(spec: SyntheticSpec, seed: int = 0) -> PayoffMatrix:
    """Payoff matrix of a layered game; ``seed`` draws the intra-layer cycle weights."""
    rng = np.random.default_rng(seed)
    m = spec.m
    upper = np.zeros((m, m))
    slices = spec.layer_slices()
    for li, sl in enumerate(slices):
        n = sl.stop - sl.start
        if spec.intra == "rps_like" and n > 1:
            upper[sl, sl] = np.triu(_cyclic_block(n, rng), k=1)
        for later in slices[li + 1:]:
            upper[sl, later] = spec.margin
    entries = upper - upper.T
    return PayoffMatrix(entries, meta={"synthetic": {
        "layer_sizes": list(spec.layer_sizes), "intra": spec.intra,
        "margin": spec.margin, "seed": seed}})


def layer_labels(spec: SyntheticSpec) -> np.ndarray:
    return np.repeat(np.arange(len(spec.layer_sizes)), spec.layer_sizes)
