"""Spectral solver for the 2D fractional generalized KdV family on the plane."""
from .basis1d import GridSpec1D, build_grid, transform
from .biortho import Discretization, Field2D, get_discretization
from .model import ModelParams

__version__ = "0.1.0"
