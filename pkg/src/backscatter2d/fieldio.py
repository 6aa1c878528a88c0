"""Binary and CSV serialization for grid fields.

Binary layout (little-endian), magic ``B2DF``:

    offset  size  content
    0       4     magic b"B2DF"
    4       2     format version (uint16), currently 1
    6       1     kind: 0 real field, 1 complex field, 2 spectrum field
    7       1     reserved (0)
    8       4     n (uint32)
    12      8     L (float64)
    20      ...   row-major samples; float64 for real fields,
                  interleaved (re, im) float64 pairs otherwise.

Spectra are stored in FFT frequency order, matching ``Grid2D.xi1d``.
CSV output is intended for small grids only (n <= 64 by default).
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .grid import ComplexField, Grid2D, RealField, SpectrumField

__all__ = ["write_field", "read_field", "field_to_csv"]

_MAGIC = b"B2DF"
_VERSION = 1
_KINDS = {RealField: 0, ComplexField: 1, SpectrumField: 2}
_CLASSES = {0: RealField, 1: ComplexField, 2: SpectrumField}


def write_field(field, path) -> None:
    path = Path(path)
    kind = _KINDS[type(field)]
    header = struct.pack(
        "<4sHBBId", _MAGIC, _VERSION, kind, 0, field.grid.n, field.grid.L
    )
    if kind == 0:
        payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    else:
        payload = np.ascontiguousarray(field.values, dtype="<c16").tobytes()
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(header + payload)
    tmp.replace(path)


def read_field(path):
    raw = Path(path).read_bytes()
    if len(raw) < 20 or raw[:4] != _MAGIC:
        raise ConfigError(f"{path}: not a field file")
    magic, version, kind, _, n, L = struct.unpack("<4sHBBId", raw[:20])
    if version != _VERSION:
        raise ConfigError(f"{path}: unsupported field format version {version}")
    grid = Grid2D(n, L)
    if kind == 0:
        values = np.frombuffer(raw[20:], dtype="<f8").reshape(n, n).copy()
    elif kind in (1, 2):
        values = np.frombuffer(raw[20:], dtype="<c16").reshape(n, n).copy()
    else:
        raise ConfigError(f"{path}: unknown field kind {kind}")
    return _CLASSES[kind](grid, values)


def field_to_csv(field, path, max_n: int = 64) -> None:
    """Human-readable dump, guarded against accidentally huge grids."""
    if field.grid.n > max_n:
        raise ConfigError(
            f"refusing CSV dump of n={field.grid.n} grid (limit {max_n}); "
            "use the binary format"
        )
    g = field.grid
    spectral = isinstance(field, SpectrumField)
    coords = g.xi1d if spectral else g.x1d
    names = ("xi_x", "xi_y") if spectral else ("x", "y")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if np.iscomplexobj(field.values):
            writer.writerow([*names, "re", "im"])
            for i in range(g.n):
                for j in range(g.n):
                    v = field.values[i, j]
                    writer.writerow([coords[i], coords[j], v.real, v.imag])
        else:
            writer.writerow([*names, "value"])
            for i in range(g.n):
                for j in range(g.n):
                    writer.writerow([coords[i], coords[j], field.values[i, j]])
