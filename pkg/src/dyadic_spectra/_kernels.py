"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``DYADIC_SPECTRA_PURE=1`` to force the numpy path.
"""
from __future__ import annotations

import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("DYADIC_SPECTRA_PURE"):
        raise ImportError("pure-python kernels requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

_Q_LIMIT = 1 << 31


def fwht(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype in (np.int64, np.float64):
        return _impl.fwht(a)
    return _pykernels.fwht(a)


def dyadic_fourier(freqs, cells, weights, K: int) -> np.ndarray:
    if K > 31:
        raise ValueError("phase reduction supports K <= 31")
    return _impl.dyadic_fourier(freqs, cells, weights, K)


def jump_energy(j0: int, j1: int, q: int, pos, coef) -> float:
    if j1 < j0:
        return 0.0
    if j0 < 1:
        raise ValueError("jump_energy needs j0 >= 1")
    if q >= _Q_LIMIT:
        raise ValueError("denominator too large for int64 phase reduction")
    return _impl.jump_energy(int(j0), int(j1), int(q), pos, coef)
