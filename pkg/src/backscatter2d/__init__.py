"""2D quantum backscattering workbench.

Forward scattering from compactly supported potentials, backscattering
Born approximation, direct singular quadrature for the cubic term of the
Born series, and Fourier-shell Sobolev regularity estimation.
"""

__version__ = "0.1.0"

from .errors import (
    BackscatterError,
    ConfigError,
    DiagnosticError,
    EstimatorError,
    NumericalError,
    PartialDataError,
    QuadratureError,
    ResolutionError,
    SolverError,
    VerdictFailure,
)
from .grid import (
    ComplexField,
    Grid2D,
    RealField,
    SpectrumField,
    fourier_forward,
    fourier_inverse,
    shell_energies,
)
from .potentials import (
    PotentialSpec,
    band_limited_field,
    bump,
    cone,
    disk,
    eval_potential,
    known_sobolev_index,
    l1_norm,
    parse_potential,
    potential_fourier,
    potential_fourier_radial,
    potential_sum,
    sample_potential,
)
from .resolvent import (
    ResolventOperator,
    ScatteringSolution,
    apply_resolvent,
    build_resolvent,
    build_resolvents,
    far_field,
    incident_wave,
    neumann_solution,
    solve_scattering,
)

__all__ = [name for name in dir() if not name.startswith("_")]
