"""Declarative pipeline configuration."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .ingest import DEFAULT_CHUNK_SIZE, DEFAULT_QUOTA
from .payoff import DEFAULT_BIN_RANGE, DEFAULT_BIN_WIDTH


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    inputs: list[str] = field(default_factory=list)
    bin_range: tuple[float, float] = DEFAULT_BIN_RANGE
    bin_width: float = DEFAULT_BIN_WIDTH
    quota: int = DEFAULT_QUOTA
    chunk_size: int = DEFAULT_CHUNK_SIZE
    seed: int = 0
    support_threshold: float = 1e-6
    tol: float = 1e-8
    max_solver_iter: int = 100_000
    k_list: list[int] = field(default_factory=lambda: [1, 5, 10, 20, 30, 40, 50])
    max_iters: int | None = None
    allocation: str = "uniform"
    rpp: bool = False
    out_dir: str = "out"

    def __post_init__(self):
        self.inputs = [str(p) for p in self.inputs]
        if len(self.bin_range) != 2:
            raise ConfigError("bin_range needs two values")
        self.bin_range = (float(self.bin_range[0]), float(self.bin_range[1]))
        self.k_list = [int(k) for k in self.k_list]
        if self.allocation not in ("uniform", "nash"):
            raise ConfigError(f"allocation must be 'uniform' or 'nash', got {self.allocation!r}")
        for name in ("quota", "chunk_size", "max_solver_iter"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.bin_width <= 0:
            raise ConfigError("bin_width must be positive")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bin_range"] = list(self.bin_range)
        return d

    def hash(self, keys=None) -> str:
        """Short sha256 of the canonical JSON form (optionally of selected keys only)."""
        d = self.to_dict()
        if keys is not None:
            d = {k: d[k] for k in keys}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @property
    def sampling_hash(self) -> str:
        return self.hash(("quota", "chunk_size", "seed"))

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        try:
            data = yaml.safe_load(Path(path).read_text()) or {}
        except OSError as err:
            raise ConfigError(f"cannot read config {path}: {err}") from err
        except yaml.YAMLError as err:
            raise ConfigError(f"cannot parse config {path}: {err}") from err
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
        return cls.from_dict(data)

    def updated(self, **overrides) -> "PipelineConfig":
        d = self.to_dict()
        d.update({k: v for k, v in overrides.items() if v is not None})
        return PipelineConfig.from_dict(d)
