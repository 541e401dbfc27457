"""Degree, lifts and fixed-point census for self-maps of S^m leaving a codimension-two sphere invariant."""

from . import census, degree, geometry, lifts, local, maps
from .errors import PolarLabError

__version__ = "0.1.0"

__all__ = ["census", "degree", "geometry", "lifts", "local", "maps", "PolarLabError", "__version__"]
