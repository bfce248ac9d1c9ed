"""Pure numpy implementations of the hot kernels.

Same signatures as the compiled ``_ckernels`` module; used when the extension
is not built or ``DYADIC_SPECTRA_PURE`` is set.
"""
from __future__ import annotations

import numpy as np

_CHUNK = 1 << 16


def fwht(a: np.ndarray) -> np.ndarray:
    """Unnormalised Walsh-Hadamard transform (natural order), returns a copy.

    Works for int64, float64 and object (Python int / Fraction) arrays.
    """
    a = np.array(a, copy=True)
    n = len(a)
    if n & (n - 1):
        raise ValueError("length must be a power of two")
    h = 1
    while h < n:
        v = a.reshape(-1, 2, h)
        x = v[:, 0, :].copy()
        y = v[:, 1, :]
        v[:, 0, :] = x + y
        v[:, 1, :] = x - y
        h *= 2
    return a


def dyadic_fourier(freqs: np.ndarray, cells: np.ndarray, weights: np.ndarray, K: int) -> np.ndarray:
    """``sum_j w_j exp(-2 pi i f c_j / 2**K)`` for every frequency ``f``.

    Phases are reduced modulo ``2**K`` in integers before conversion to float.
    """
    freqs = np.asarray(freqs, dtype=np.int64)
    cells = np.asarray(cells, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    n = np.int64(1) << np.int64(K)
    mask = n - 1
    fr = freqs & mask  # f mod 2**K (two's complement keeps negatives right)
    out = np.empty(len(freqs), dtype=np.complex128)
    step = max(1, _CHUNK // max(1, len(cells)))
    scale = 2.0 * np.pi / float(n)
    for s in range(0, len(freqs), step):
        ph = (fr[s:s + step, None] * cells[None, :]) & mask
        ang = ph.astype(np.float64) * scale
        out[s:s + step] = (np.cos(ang) - 1j * np.sin(ang)) @ weights
    return out


def jump_energy(j0: int, j1: int, q: int, pos: np.ndarray, coef: np.ndarray) -> float:
    """``sum_{j=j0}^{j1} |sum_i c_i exp(-2 pi i j p_i / q)|**2 / (4 pi**2 j**2)``.

    This is the energy of the Fourier coefficients ``nu_hat(j) / (2 pi i j)`` of
    a step function whose jumps ``c_i`` sit at ``p_i / q``. Requires
    ``1 <= j0`` and ``q < 2**31``.
    """
    pos = np.asarray(pos, dtype=np.int64) % q
    coef = np.asarray(coef, dtype=np.float64)
    total = 0.0
    scale = 2.0 * np.pi / float(q)
    for s in range(j0, j1 + 1, _CHUNK):
        js = np.arange(s, min(j1, s + _CHUNK - 1) + 1, dtype=np.int64)
        ph = ((js % q)[:, None] * pos[None, :]) % q
        ang = ph.astype(np.float64) * scale
        re = np.cos(ang) @ coef
        im = np.sin(ang) @ coef
        jf = js.astype(np.float64)
        total += float(np.sum((re * re + im * im) / (jf * jf)))
    return total / (4.0 * np.pi * np.pi)
