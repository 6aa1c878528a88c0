"""Content-addressed disk cache for scattering solutions.

Entries are keyed by (potential label, k, theta, n, L, tol); hits are
bit-identical to the original computation since the solver is
deterministic. Writes go through a temporary file plus atomic rename, so
concurrent readers see either a miss or a complete entry, never a torn
file; corrupted entries are treated as misses with a warning.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fieldio import read_field, write_field
from .grid import ComplexField, Grid2D
from .potentials import PotentialSpec, parse_potential
from .resolvent import ScatteringSolution

logger = logging.getLogger(__name__)

__all__ = ["SolutionCache", "cache_key", "cache_get", "cache_put"]


def cache_key(
    q: PotentialSpec, k: float, theta, grid: Grid2D, tol: float
) -> str:
    theta = np.asarray(theta, dtype=float)
    text = f"{q.label()}|k={k!r}|theta=({theta[0]!r},{theta[1]!r})|n={grid.n}|L={grid.L!r}|tol={tol!r}"
    return hashlib.sha256(text.encode()).hexdigest()


@dataclass(frozen=True)
class SolutionCache:
    root: Path

    def __post_init__(self):
        Path(self.root).mkdir(parents=True, exist_ok=True)

    def _paths(self, key: str):
        base = Path(self.root) / key[:2] / key
        return base.with_suffix(".field"), base.with_suffix(".json")

    def get(self, key: str) -> ScatteringSolution | None:
        fpath, mpath = self._paths(key)
        if not (fpath.exists() and mpath.exists()):
            return None
        try:
            meta = json.loads(mpath.read_text())
            field = read_field(fpath)
            q = parse_potential(meta["potential"])
            return ScatteringSolution(
                meta["k"],
                tuple(meta["theta"]),
                ComplexField(field.grid, field.values),
                meta["iterations"],
                meta["residual"],
                q,
                meta["tol"],
            )
        except Exception as exc:  # noqa: BLE001 - any corruption is a miss
            logger.warning("cache entry %s corrupted (%s); recomputing", key[:12], exc)
            return None

    def put(self, key: str, sol: ScatteringSolution) -> None:
        fpath, mpath = self._paths(key)
        fpath.parent.mkdir(parents=True, exist_ok=True)
        write_field(ComplexField(sol.u_s.grid, sol.u_s.values), fpath)
        meta = {
            "potential": sol.potential.label(),
            "k": sol.k,
            "theta": list(sol.theta),
            "iterations": sol.iterations,
            "residual": sol.residual,
            "tol": sol.tol,
        }
        tmp = mpath.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(meta))
        tmp.replace(mpath)

    def stats(self) -> dict:
        root = Path(self.root)
        entries = list(root.glob("*/*.field"))
        size = sum(p.stat().st_size for p in entries)
        return {"entries": len(entries), "bytes": size, "root": str(root)}

    def clear(self) -> int:
        root = Path(self.root)
        n = 0
        for p in root.glob("*/*"):
            p.unlink()
            n += 1
        return n


def cache_get(cache: SolutionCache, key: str):
    return cache.get(key)


def cache_put(cache: SolutionCache, key: str, sol: ScatteringSolution) -> None:
    cache.put(key, sol)
