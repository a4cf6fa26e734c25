"""Exception types shared across the package."""


class PhotonLabError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(PhotonLabError, ValueError):
    """A physical parameter or precondition is out of its allowed range."""


class DataFormatError(PhotonLabError, ValueError):
    """An input file does not conform to one of the declared formats."""


class FitFailureError(PhotonLabError, RuntimeError):
    """Nonlinear fit did not converge or hit a singular system.

    Carries a ``diagnostics`` dict (iteration count, last parameters,
    residual norm) so callers can report what went wrong.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class UnresolvableLineError(PhotonLabError, ValueError):
    """Observed linewidth is at or below the instrument resolution."""


class WavelengthRangeError(PhotonLabError, ValueError):
    """Wavelength outside the supported band of a material model."""


class NoGuidedModeError(PhotonLabError, RuntimeError):
    """The guided-mode characteristic equation has no root in the bracket."""


class UnreachableEfficiencyError(PhotonLabError, ValueError):
    """Requested channeling efficiency exceeds the surface maximum."""


class UndefinedEfficiencyError(PhotonLabError, ValueError):
    """Coupling efficiency is undefined (no counts in either channel)."""
