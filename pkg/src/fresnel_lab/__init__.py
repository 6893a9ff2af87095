"""Phase-space laboratory for generalized Fresnel functions and higher-order dispersive propagators."""

__version__ = "0.1.0"

from .errors import (
    AliasingWarning,
    ConfigError,
    DiagnosticError,
    DomainError,
    FresnelLabError,
    InterpolationWarning,
    ModeError,
    NonContractionError,
    NumericQualityError,
    ParameterError,
    StructuralError,
)
from .grid import GridSpec, SampledField, forward_fourier, inverse_fourier, lp_norm
from .symbols import SmoothedSymbol, anisotropic_power, custom_symbol, quadratic_form, radial_power
from .gabor import Window, bump_window, gaussian_window, stft, modulation_norm, amalgam_norm
from .propagator import MultiplierPropagator, dispersive_decay_scan, fundamental_solution
from .potentials import CroppedCoulomb, DensityField, DiracComb, Envelope, SphereShell, modulated
from .solver import Nonlinearity, SolverConfig, global_solve, low_regularity_solve, picard_solve
