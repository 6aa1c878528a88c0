"""Periodic Cartesian grids and discrete Fourier transforms.

Convention
----------
The continuous transform pair used everywhere in this package is

    F[f](xi) = int_{R^2} exp(-i x.xi) f(x) dx,
    f(x)     = (2 pi)^-2 int_{R^2} exp(i x.xi) F[f](xi) dxi.

A ``Grid2D`` discretises the square [-L, L)^2 with n points per axis
(h = 2L/n) and its dual lattice with spacing dxi = pi/L. ``fourier_forward``
returns the Riemann-sum approximation of the continuous transform, so
analytic transforms can be compared against grid transforms without
bookkeeping factors. Spectra are stored in FFT (wrap-around) frequency
order; ``Grid2D.xi1d`` gives the matching coordinates.

Dyadic shell energies of a spectrum,

    E_j = sum_{2^j <= |xi| < 2^(j+1), |xi| > cutoff} |F(xi)|^2 dxi^2,

are the raw material for the Sobolev-regularity estimators in
:mod:`backscatter2d.analysis`. Shells start above a low-frequency cutoff
(default 10) because all regularity statements here are modulo smooth
functions, i.e. modulo low frequencies.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List

import numpy as np

from .errors import ConfigError, DiagnosticError

__all__ = [
    "Grid2D",
    "RealField",
    "ComplexField",
    "SpectrumField",
    "ShellEnergy",
    "fourier_forward",
    "fourier_inverse",
    "shell_energies",
]


@dataclass(frozen=True)
class Grid2D:
    """Square periodic grid on [-L, L)^2 with its dual lattice.

    n must be a power of two (>= 16) so shells and FFTs behave
    predictably; L is the physical half-width.
    """

    n: int
    L: float

    def __post_init__(self):
        if self.n < 16 or (self.n & (self.n - 1)) != 0:
            raise ConfigError(f"grid size n={self.n} must be a power of two >= 16")
        if not self.L > 0:
            raise ConfigError(f"grid half-width L={self.L} must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def dual_spacing(self) -> float:
        return np.pi / self.L

    @property
    def nyquist(self) -> float:
        """Largest resolved |xi| along an axis: pi n / (2 L)."""
        return np.pi * self.n / (2.0 * self.L)

    @cached_property
    def x1d(self) -> np.ndarray:
        return -self.L + self.spacing * np.arange(self.n)

    @cached_property
    def xi1d(self) -> np.ndarray:
        """Dual coordinates in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    @cached_property
    def xx(self) -> np.ndarray:
        return np.meshgrid(self.x1d, self.x1d, indexing="ij")[0]

    @cached_property
    def yy(self) -> np.ndarray:
        return np.meshgrid(self.x1d, self.x1d, indexing="ij")[1]

    @cached_property
    def xi_x(self) -> np.ndarray:
        return np.meshgrid(self.xi1d, self.xi1d, indexing="ij")[0]

    @cached_property
    def xi_y(self) -> np.ndarray:
        return np.meshgrid(self.xi1d, self.xi1d, indexing="ij")[1]

    @cached_property
    def xi_mag(self) -> np.ndarray:
        return np.hypot(self.xi_x, self.xi_y)

    @cached_property
    def r_mag(self) -> np.ndarray:
        return np.hypot(self.xx, self.yy)

    @cached_property
    def _phase(self) -> np.ndarray:
        # exp(i L xi_j) on the dual lattice reduces to a checkerboard sign.
        s = np.where(np.arange(self.n) % 2 == 0, 1.0, -1.0)
        return np.outer(s, s)


def _check_values(grid: Grid2D, values: np.ndarray) -> None:
    if values.shape != (grid.n, grid.n):
        raise ConfigError(
            f"field shape {values.shape} does not match grid ({grid.n}, {grid.n})"
        )


@dataclass(frozen=True)
class RealField:
    """Real samples on the physical lattice (row-major, index = x index)."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        _check_values(self.grid, self.values)
        if np.iscomplexobj(self.values):
            raise ConfigError("RealField requires real-valued samples")


@dataclass(frozen=True)
class ComplexField:
    """Complex samples on the physical lattice."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        _check_values(self.grid, self.values)


@dataclass(frozen=True)
class SpectrumField:
    """Complex samples on the dual lattice, FFT frequency order."""

    grid: Grid2D
    values: np.ndarray

    def __post_init__(self):
        _check_values(self.grid, self.values)


def fourier_forward(field: RealField | ComplexField) -> SpectrumField:
    """Continuous-convention forward transform of a sampled field.

    Returns h^2 * sum_x f(x) exp(-i x.xi) on the dual lattice, which is the
    trapezoid approximation of the continuous transform (spectrally accurate
    for smooth, box-periodizable fields).
    """
    g = field.grid
    fhat = g.spacing**2 * g._phase * np.fft.fft2(field.values)
    return SpectrumField(g, fhat)


def fourier_inverse(spectrum: SpectrumField) -> ComplexField:
    """Exact lattice inverse of :func:`fourier_forward`."""
    g = spectrum.grid
    f = np.fft.ifft2(g._phase * spectrum.values) / g.spacing**2
    return ComplexField(g, f)


@dataclass(frozen=True)
class ShellEnergy:
    j: int
    energy: float
    count: int
    reliable: bool


def shell_energies(
    spectrum: SpectrumField, cutoff: float = 10.0, min_count: int = 8
) -> List[ShellEnergy]:
    """Dyadic shell energies E_j of a spectrum above a low-frequency cutoff.

    Shell j collects lattice points with 2^j <= |xi| < 2^(j+1) and
    |xi| > cutoff (half-open bins; points exactly at the cutoff are
    excluded). Shells with fewer than ``min_count`` lattice points are
    flagged unreliable. Raises ``DiagnosticError`` when fewer than three
    reliable shells exist on the grid.
    """
    if cutoff < 0:
        raise ConfigError("cutoff must be >= 0")
    g = spectrum.grid
    r = g.xi_mag
    sel = r > cutoff
    if not np.any(sel):
        raise DiagnosticError("no lattice points above the cutoff")
    rmax = float(r[sel].max())
    j_lo = int(np.floor(np.log2(max(cutoff, r[sel].min()))))
    j_hi = int(np.floor(np.log2(rmax)))
    w2 = np.abs(spectrum.values) ** 2 * g.dual_spacing**2
    shells: List[ShellEnergy] = []
    for j in range(j_lo, j_hi + 1):
        mask = sel & (r >= 2.0**j) & (r < 2.0 ** (j + 1))
        count = int(mask.sum())
        if count == 0:
            continue
        shells.append(
            ShellEnergy(j, float(w2[mask].sum()), count, count >= min_count)
        )
    if sum(s.reliable for s in shells) < 3:
        raise DiagnosticError(
            "grid too coarse: fewer than 3 reliable dyadic shells above cutoff"
        )
    return shells
