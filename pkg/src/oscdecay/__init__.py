"""Decay of Fourier transforms of quasi-homogeneous surface measures in R^4."""

from .core import (
    BivariatePolynomial,
    SectorRegion,
    Surface,
    SurfaceMap,
    Weights,
    example5,
    load_surface,
)
from .fits import ScalingFit

__version__ = "0.1.0"

__all__ = [
    "BivariatePolynomial",
    "ScalingFit",
    "SectorRegion",
    "Surface",
    "SurfaceMap",
    "Weights",
    "example5",
    "load_surface",
    "__version__",
]
