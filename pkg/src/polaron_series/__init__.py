"""Diagrammatic expansion of the polaron heat semigroup and its numerical checks."""

__version__ = "0.1.0"

from .errors import (ConfigError, ContourError, CurveError, InfeasibleModelError, IntegrabilityError,
                     PolaronSeriesError, SingularEliminationError, SizeLimitError, TruncationError)
from .model import GaussianMixture, ModelSpec
from .pairings import CrossingTable, DyckPath, Pairing
from .quadform import QuadraticForm, ReducedGaussian
from .series import SeriesEstimate, SeriesSettings

__all__ = [
    "ConfigError", "ContourError", "CurveError", "InfeasibleModelError", "IntegrabilityError",
    "PolaronSeriesError", "SingularEliminationError", "SizeLimitError", "TruncationError",
    "GaussianMixture", "ModelSpec", "CrossingTable", "DyckPath", "Pairing", "QuadraticForm",
    "ReducedGaussian", "SeriesEstimate", "SeriesSettings", "__version__",
]
