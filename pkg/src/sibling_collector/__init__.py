"""Expected unfilled album slots for the siblings of the coupon collector."""

from .families import FamilySpec, Kind, ProbVector, normalize, probabilities, weights
from .quadrature import QuadratureConfig, expected_unfilled

__all__ = [
    "FamilySpec",
    "Kind",
    "ProbVector",
    "QuadratureConfig",
    "expected_unfilled",
    "normalize",
    "probabilities",
    "weights",
]
__version__ = "0.1.0"
