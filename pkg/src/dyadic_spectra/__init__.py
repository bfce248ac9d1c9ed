"""Singular measures on the circle at finite dyadic resolution."""
from ._kernels import BACKEND
from .measure import (
    DyadicMeasure,
    convolve,
    convolve_power,
    make_atoms,
    make_cantor,
    make_dirac,
    make_liouville_truncation,
    make_riesz_sampled,
    make_sparse,
    make_uniform,
)

__version__ = "0.1.0"
