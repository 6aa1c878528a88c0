"""Experiment configuration: flat key = value text files.

The format is deliberately plain (diffable, language-agnostic): one
``key = value`` per line, ``#`` comments, no nesting and no embedded code.
Unknown keys are rejected; every run writes the resolved configuration and
its hash next to the outputs so artifacts are reproducible bit for bit
given the same config and seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Tuple

from .errors import ConfigError
from .potentials import PotentialSpec, parse_potential

__all__ = ["ExperimentConfig", "EXPERIMENTS"]

EXPERIMENTS = (
    "forward",
    "born",
    "q3-verify",
    "theorem1",
    "theorem2",
    "scaling",
    "lemmas",
    "cache",
)


def _parse_pairs(text: str) -> Tuple[Tuple[float, float], ...]:
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(",")
        if len(parts) != 2:
            raise ConfigError(f"expected 'x,y' pair, got {chunk!r}")
        pts.append((float(parts[0]), float(parts[1])))
    if not pts:
        raise ConfigError("no points given")
    return tuple(pts)


def _parse_floats(text: str) -> Tuple[float, ...]:
    vals = tuple(float(v) for v in text.split(",") if v.strip())
    if not vals:
        raise ConfigError("empty list")
    return vals


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated parameters for one experiment run."""

    experiment: str = "theorem2"
    potential: str = "disk(radius=0.8, amplitude=0.05)"
    n: int = 256
    L: float = 4.0
    k_max: float = 16.0
    angle_count: int = 16
    tol: float = 1e-10
    cutoff: float = 10.0
    C0: float = 10.0
    threshold: float = 0.0  # 0 -> experiment default
    m: int = 0  # 0 -> auto
    outer_extent: float = 0.0  # 0 -> auto
    collar_nodes: int = 12
    delta0: float = 0.25
    eta_samples: str = "12,0; 16,0; 11,11"
    epsilon_ladder: str = "0.02, 0.04, 0.08, 0.16"
    radial_band: str = "12, 68"
    n_radial: int = 12
    q3_angle_count: int = 8
    battery_samples: int = 100000
    seed: int = 20240801
    threads: int = 4
    out_dir: str = "out"
    cache_dir: str = ""

    # ------------------------------------------------------------------
    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}"
            )
        self.potential_spec()  # parses or raises
        if self.n < 16 or (self.n & (self.n - 1)) != 0:
            raise ConfigError("n must be a power of two >= 16")
        if self.L <= 0:
            raise ConfigError("L must be positive")
        if self.k_max <= 0:
            raise ConfigError("k_max must be positive")
        if self.angle_count < 16 or (self.angle_count & (self.angle_count - 1)):
            raise ConfigError("angle_count must be a power of two >= 16")
        if not (1e-14 < self.tol < 1e-2):
            raise ConfigError("tol must lie in (1e-14, 1e-2)")
        if self.C0 <= 1.0:
            raise ConfigError(
                "the high-frequency cutoff requires C0 > 1 "
                "(filtered terms are defined only above it)"
            )
        if self.cutoff < 0:
            raise ConfigError("cutoff must be >= 0")
        if not 0.0 < self.delta0 <= 0.25:
            raise ConfigError("delta0 must lie in (0, 0.25]")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.n_radial < 3:
            raise ConfigError("n_radial must be >= 3")
        if self.q3_angle_count < 1:
            raise ConfigError("q3_angle_count must be >= 1")
        eps = self.epsilons()
        if any(e <= 0 for e in eps) or list(eps) != sorted(eps):
            raise ConfigError("epsilon_ladder must be positive and increasing")
        band = self.band()
        if not 0 < band[0] < band[1]:
            raise ConfigError("radial_band must be an increasing positive pair")

    # ------------------------------------------------------------------
    def potential_spec(self) -> PotentialSpec:
        return parse_potential(self.potential)

    def epsilons(self) -> Tuple[float, ...]:
        return _parse_floats(self.epsilon_ladder)

    def band(self) -> Tuple[float, float]:
        vals = _parse_floats(self.radial_band)
        if len(vals) != 2:
            raise ConfigError("radial_band must be 'lo, hi'")
        return vals[0], vals[1]

    def sample_points(self) -> Tuple[Tuple[float, float], ...]:
        return _parse_pairs(self.eta_samples)

    def gain_threshold(self) -> float:
        if self.threshold > 0:
            return self.threshold
        return 0.6 if self.experiment == "theorem1" else 0.3

    # ------------------------------------------------------------------
    @classmethod
    def from_mapping(cls, mapping: dict) -> "ExperimentConfig":
        kwargs = {}
        valid = {f.name: f.type for f in fields(cls)}
        casts = {int: int, float: float, str: str}
        for key, raw in mapping.items():
            if key not in valid:
                raise ConfigError(f"unknown config key {key!r}")
            typ = cls.__dataclass_fields__[key].type
            try:
                if typ == "int":
                    kwargs[key] = int(raw)
                elif typ == "float":
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = str(raw)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r}") from exc
        cfg = cls(**kwargs)
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        mapping = {}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            mapping[key.strip()] = val.strip()
        return cls.from_mapping(mapping)

    def with_overrides(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)

    # ------------------------------------------------------------------
    def resolved_text(self) -> str:
        lines = [
            f"{f.name} = {getattr(self, f.name)}"
            for f in fields(self)
        ]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.resolved_text().encode()).hexdigest()[:12]
