"""Backscattering data, Born approximation, and resolvent-route series terms.

Backscattering identifies one scalar datum per dual point: with
xi = -2 k theta (so k = |xi|/2 and theta = -xi/|xi|), the far field
A(k, theta, -theta) fills Fourier space and defines the Born approximation

    F[q_B](xi) = A(k, theta, -theta).

Inserting the Lippmann-Schwinger equation into the far-field integral
expands the data in multilinear terms,

    A(k, theta, -theta) = F[q](xi) + sum_{j>=2} Qjhat(xi),
    Qjhat(xi) = int exp(i k theta.y) (q R_k)^(j-1)(q exp(i k theta.))(y) dy,

evaluated here by j-1 resolvent applications followed by the far-field
quadrature: no linear solve is involved, so each term is exactly j-linear
in q. ``filtered_term_spectrum`` restricts a term to |xi| > C0 (the high
frequency cutoff chi*, C0 > 1), and ``term_norm_polar`` integrates |Qjhat|^2
over the covered band in polar coordinates for the amplitude-scaling laws.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import ConfigError, PartialDataError
from .grid import Grid2D, RealField, SpectrumField, fourier_inverse
from .potentials import PotentialSpec, band_limited_field, potential_fourier_radial
from .resolvent import (
    build_resolvent,
    build_resolvents,
    far_field,
    incident_wave,
    solve_scattering,
)

logger = logging.getLogger(__name__)

__all__ = [
    "BackscatterSample",
    "BackscatterData",
    "BornReconstruction",
    "backscatter_dataset",
    "assemble_qB",
    "born_term",
    "born_term_chain",
    "filtered_term_spectrum",
    "term_norm_polar",
    "backscatter_amplitude",
    "write_backscatter_csv",
    "read_backscatter_csv",
]


@dataclass(frozen=True)
class BackscatterSample:
    """One datum A(k, theta, -theta) at xi = -2 k theta (|xi| = 2k exactly)."""

    k: float
    theta: tuple
    amplitude: complex

    @property
    def xi(self) -> np.ndarray:
        return -2.0 * self.k * np.asarray(self.theta)


@dataclass(frozen=True)
class BackscatterData:
    """Polar backscattering dataset: radii x angles grid of amplitudes.

    ``values[i, l]`` is A at xi with |xi| = radii[i] and direction angle
    angles[l]; the corresponding incident direction is theta = -xi/|xi|.
    """

    radii: np.ndarray
    angles: np.ndarray
    values: np.ndarray
    potential_id: str
    tol: float
    grid_n: int
    grid_L: float

    def __post_init__(self):
        if np.any(np.diff(self.radii) <= 0):
            raise ConfigError("radii must be strictly increasing")
        P = self.angles.size
        if P < 16 or (P & (P - 1)) != 0:
            raise ConfigError("angle count must be a power of two >= 16")
        if not np.allclose(self.angles, 2.0 * np.pi * np.arange(P) / P):
            raise ConfigError("angles must uniformly cover [0, 2 pi)")
        if self.values.shape != (self.radii.size, P):
            raise ConfigError("values shape does not match radii x angles")

    @property
    def k_max(self) -> float:
        return 0.5 * float(self.radii[-1])


def backscatter_amplitude(
    q: PotentialSpec, k: float, theta, grid: Grid2D, tol: float = 1e-10, cache=None
) -> complex:
    sol = None
    key = None
    if cache is not None:
        from .cache import cache_key

        key = cache_key(q, k, theta, grid, tol)
        sol = cache.get(key)
    if sol is None:
        sol = solve_scattering(q, k, theta, grid, tol=tol)
        if cache is not None:
            cache.put(key, sol)
    return far_field(sol, q, -np.asarray(sol.theta))


def backscatter_dataset(
    q: PotentialSpec,
    k_list: Sequence[float],
    angle_count: int,
    grid: Grid2D,
    tol: float = 1e-10,
    threads: int = 1,
    cache=None,
) -> BackscatterData:
    """Solve scattering for every (k, theta_l) and collect A(k, theta, -theta).

    Deterministic regardless of thread count: each (k, l) slot is written
    independently and reductions happen later in fixed order. Solver
    failures are collected into a ``PartialDataError`` listing the failed
    pairs.
    """
    ks = np.asarray(sorted(float(k) for k in k_list))
    if np.any(ks <= 0) or np.unique(ks).size != ks.size:
        raise ConfigError("k_list must be positive, strictly increasing")
    if angle_count < 16 or (angle_count & (angle_count - 1)) != 0:
        raise ConfigError("angle_count must be a power of two >= 16")
    angles = 2.0 * np.pi * np.arange(angle_count) / angle_count
    thetas = -np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    build_resolvents(grid, ks, q.support_radius)  # shared J0 pass warms the cache

    values = np.zeros((ks.size, angle_count), dtype=complex)
    failures = []

    def work(item):
        i, l = item
        try:
            values[i, l] = backscatter_amplitude(q, ks[i], thetas[l], grid, tol, cache)
        except Exception as exc:  # noqa: BLE001 - collected into PartialDataError
            failures.append(((float(ks[i]), float(angles[l])), str(exc)))

    jobs = [(i, l) for i in range(ks.size) for l in range(angle_count)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, jobs))
    else:
        for job in jobs:
            work(job)
    if failures:
        raise PartialDataError(
            f"{len(failures)} of {len(jobs)} scattering solves failed", failures
        )
    return BackscatterData(
        2.0 * ks, angles, values, q.label(), tol, grid.n, grid.L
    )


@dataclass(frozen=True)
class BornReconstruction:
    """F[q_B] on a grid plus the coverage mask of the data band."""

    q_hat: SpectrumField
    q_B: RealField
    covered: np.ndarray
    r_min: float
    r_max: float


def assemble_qB(data: BackscatterData, grid: Grid2D) -> BornReconstruction:
    """Resample polar F[q_B] data onto the grid and invert.

    Bicubic interpolation in (radius, angle) with periodic angle padding;
    lattice points outside the covered band [r_min, r_max] are zeroed and
    flagged uncovered. Hermitian symmetry is enforced before inversion so
    q_B is real (raw backscattering data is not exactly Hermitian: the
    nonlinear terms carry a genuine anti-Hermitian part).
    """
    r_max = float(data.radii[-1])
    r_min = float(data.radii[0])
    if grid.nyquist < r_max:
        raise ConfigError(
            f"grid Nyquist {grid.nyquist:.1f} below data band {r_max:.1f}"
        )
    if r_max < grid.nyquist / np.sqrt(2.0):
        logger.warning(
            "data band (|xi| <= %.1f) covers only part of the grid (corner %.1f); "
            "uncovered lattice points are zero-filled",
            r_max,
            np.sqrt(2) * grid.nyquist,
        )
    P = data.angles.size
    pad = 3
    ang_ext = np.concatenate(
        [data.angles[-pad:] - 2 * np.pi, data.angles, data.angles[:pad] + 2 * np.pi]
    )
    vals_ext = np.concatenate(
        [data.values[:, -pad:], data.values, data.values[:, :pad]], axis=1
    )
    sp_re = RectBivariateSpline(data.radii, ang_ext, vals_ext.real, kx=3, ky=3, s=0)
    sp_im = RectBivariateSpline(data.radii, ang_ext, vals_ext.imag, kx=3, ky=3, s=0)

    r = grid.xi_mag
    phi = np.mod(np.arctan2(grid.xi_y, grid.xi_x), 2.0 * np.pi)
    covered = (r >= r_min) & (r <= r_max)
    qhat = np.zeros((grid.n, grid.n), dtype=complex)
    qhat[covered] = sp_re.ev(r[covered], phi[covered]) + 1j * sp_im.ev(
        r[covered], phi[covered]
    )

    neg = (grid.n - np.arange(grid.n)) % grid.n
    qhat = 0.5 * (qhat + np.conj(qhat[np.ix_(neg, neg)]))
    field = fourier_inverse(SpectrumField(grid, qhat))
    return BornReconstruction(
        SpectrumField(grid, qhat),
        RealField(grid, field.values.real),
        covered,
        r_min,
        r_max,
    )


def born_term_chain(
    q: PotentialSpec, xi, grid: Grid2D, jmax: int
) -> list[complex]:
    """[Q1hat, ..., Qjmaxhat] at xi from one resolvent chain.

    Q1hat is F[q](xi) read through the far-field quadrature; each further
    term applies f -> R_k(q f) once more. Backscattering kinematics:
    k = |xi|/2, theta = -xi/|xi|, readout direction theta' = -theta.
    """
    xi = np.asarray(xi, dtype=float)
    norm = float(np.hypot(*xi))
    if norm == 0:
        raise ConfigError("xi must be nonzero")
    if jmax < 1:
        raise ConfigError("jmax must be >= 1")
    k = 0.5 * norm
    theta = -xi / norm
    op = build_resolvent(grid, k, q.support_radius)
    qv = band_limited_field(q, grid).values
    phase = np.exp(1j * k * (theta[0] * grid.xx + theta[1] * grid.yy))
    f = qv * incident_wave(grid, k, theta)
    out = [complex(grid.spacing**2 * np.sum(phase * f))]
    for _ in range(jmax - 1):
        f = qv * np.fft.ifft2(op.symbol * np.fft.fft2(f))
        out.append(complex(grid.spacing**2 * np.sum(phase * f)))
    return out


def born_term(q: PotentialSpec, j: int, xi, grid: Grid2D) -> complex:
    """j-adic Born term Qjhat(xi) via the resolvent route (j >= 2)."""
    if j < 2:
        raise ConfigError("born_term is defined for j >= 2 (j = 1 is F[q])")
    return born_term_chain(q, xi, grid, j)[-1]


def filtered_term_spectrum(
    q: PotentialSpec, j: int, grid: Grid2D, C0: float = 10.0
) -> SpectrumField:
    """Qjhat on lattice points with |xi| > C0, zero elsewhere (cutoff chi*).

    Every retained lattice point costs a full resolvent chain at its own
    wavenumber; intended for coarse grids or narrow bands.
    """
    if C0 <= 1.0:
        raise ConfigError("the high-frequency cutoff requires C0 > 1")
    vals = np.zeros((grid.n, grid.n), dtype=complex)
    mask = grid.xi_mag > C0
    idx = np.argwhere(mask)
    for i, l in idx:
        xi = np.array([grid.xi_x[i, l], grid.xi_y[i, l]])
        vals[i, l] = born_term(q, j, xi, grid)
    return SpectrumField(grid, vals)


def term_norm_polar(
    q: PotentialSpec,
    grid: Grid2D,
    jmax: int,
    C0: float = 10.0,
    r_max: float | None = None,
    n_radii: int = 24,
    angle_count: int = 16,
) -> dict[int, float]:
    """L2 norms of the filtered terms over C0 < |xi| <= r_max, polar quadrature.

    Returns {j: ||chi* Qjhat||_{L2(dxi)} / (2 pi)} for 2 <= j <= jmax
    (Plancherel-normalised, matching the physical-space L2 norm).
    """
    if r_max is None:
        r_max = grid.nyquist / 2.0
    radii = np.linspace(C0, r_max, n_radii + 1)[1:]
    dr = radii[1] - radii[0]
    angles = 2.0 * np.pi * np.arange(angle_count) / angle_count
    acc = {j: 0.0 for j in range(2, jmax + 1)}
    for r in radii:
        for a in angles:
            xi = r * np.array([np.cos(a), np.sin(a)])
            terms = born_term_chain(q, xi, grid, jmax)
            for j in range(2, jmax + 1):
                acc[j] += abs(terms[j - 1]) ** 2 * r * dr * (2 * np.pi / angle_count)
    return {j: float(np.sqrt(v)) / (2.0 * np.pi) for j, v in acc.items()}


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def dataset_hash(data: BackscatterData) -> str:
    h = hashlib.sha256()
    h.update(data.potential_id.encode())
    h.update(np.ascontiguousarray(data.radii).tobytes())
    h.update(np.ascontiguousarray(data.values).tobytes())
    return h.hexdigest()[:16]


def write_backscatter_csv(data: BackscatterData, path) -> None:
    """CSV (k, theta_angle, Re A, Im A) with a JSON metadata sidecar."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "theta_angle", "re_A", "im_A"])
        for i, r in enumerate(data.radii):
            k = 0.5 * r
            for l, a in enumerate(data.angles):
                theta_angle = np.mod(a + np.pi, 2 * np.pi)
                v = data.values[i, l]
                writer.writerow([repr(k), repr(float(theta_angle)), repr(v.real), repr(v.imag)])
    meta = {
        "potential": data.potential_id,
        "tol": data.tol,
        "grid_n": data.grid_n,
        "grid_L": data.grid_L,
        "n_radii": int(data.radii.size),
        "n_angles": int(data.angles.size),
        "r_min": float(data.radii[0]),
        "r_max": float(data.radii[-1]),
        "hash": dataset_hash(data),
    }
    path.with_suffix(".meta.json").write_text(json.dumps(meta, indent=2))


def read_backscatter_csv(path) -> BackscatterData:
    path = Path(path)
    meta = json.loads(path.with_suffix(".meta.json").read_text())
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            rows.append([float(x) for x in row])
    arr = np.asarray(rows)
    nr, na = meta["n_radii"], meta["n_angles"]
    values = (arr[:, 2] + 1j * arr[:, 3]).reshape(nr, na)
    radii = 2.0 * arr[::na, 0]
    angles = np.mod(arr[:na, 1] - np.pi, 2 * np.pi)
    data = BackscatterData(
        radii, angles, values, meta["potential"], meta["tol"], meta["grid_n"], meta["grid_L"]
    )
    if dataset_hash(data) != meta["hash"]:
        raise ConfigError(f"{path}: dataset hash mismatch (corrupted file?)")
    return data
