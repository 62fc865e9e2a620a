"""Exception types shared across the package."""


class PolaronSeriesError(Exception):
    """Base class for all package errors."""


class SizeLimitError(PolaronSeriesError):
    """A combinatorial or basis size exceeds the configured cap."""


class IntegrabilityError(PolaronSeriesError):
    """A momentum integral diverges for the requested model/times."""


class SingularEliminationError(PolaronSeriesError):
    """Schur elimination hit a vanishing pivot."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class InfeasibleModelError(PolaronSeriesError):
    """The model violates the Lieb-Yamazaki integrability condition."""

    def __init__(self, message, divergent=None):
        super().__init__(message)
        self.divergent = divergent


class ContourError(PolaronSeriesError):
    """Contour quadrature cannot meet its tolerance."""

    def __init__(self, message, suggested_im_max=None):
        super().__init__(message)
        self.suggested_im_max = suggested_im_max


class TruncationError(PolaronSeriesError):
    """Series truncation dominates the requested quantity."""


class CurveError(PolaronSeriesError):
    """A sampled curve is too sparse for the requested operation."""


class ConfigError(PolaronSeriesError):
    """Malformed or unknown configuration entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
