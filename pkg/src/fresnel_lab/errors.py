"""Exception and warning classes shared across the package."""


class FresnelLabError(Exception):
    """Base class for all package errors."""


class ParameterError(FresnelLabError, ValueError):
    """An argument is outside its admissible range."""


class StructuralError(FresnelLabError, ValueError):
    """Shapes, grids or domains of the inputs do not fit together."""


class DomainError(FresnelLabError, ValueError):
    """A function was evaluated outside its domain (e.g. a symbol at the origin)."""


class ModeError(FresnelLabError):
    """A solver mode was requested whose hypotheses are not met."""


class ConfigError(FresnelLabError):
    """A run configuration is malformed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericQualityError(FresnelLabError):
    """A computation was refused because the discretization is inadequate."""


class NonContractionError(FresnelLabError):
    """Picard iteration failed to contract."""


class DiagnosticError(FresnelLabError):
    """Not enough usable data for a diagnostic fit."""


class AliasingWarning(UserWarning):
    """Local frequencies exceed the grid Nyquist limit on too many points."""


class InterpolationWarning(UserWarning):
    """Band-limited interpolation at off-grid points may be inaccurate."""
