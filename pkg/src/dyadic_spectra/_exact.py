"""Exact rational helpers: parsing, powers of two with rational exponents,
and filtered comparisons against ``2**alpha``."""
from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

import numpy as np
from sympy import integer_nthroot

Rational = Union[int, Fraction, str, float]

# float decisions closer than this (relative) fall back to exact integers
_FILTER = 1e-9


def as_fraction(x: Rational) -> Fraction:
    """Parse ``x`` as an exact rational.

    Strings go through ``Fraction(str)`` so ``"0.75"`` and ``"-3/4"`` are
    exact. Floats are converted exactly (binary value), which is rarely what a
    caller wants for parameters; the CLI always passes strings.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, (float, np.floating)):
        return Fraction(float(x))
    raise TypeError(f"cannot interpret {x!r} as a rational")


def fraction_str(x: Fraction | int) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def iroot(value: int, q: int) -> int:
    """Largest integer ``c >= 0`` with ``c**q <= value``."""
    if value < 0:
        raise ValueError("iroot of a negative number")
    return int(integer_nthroot(int(value), int(q))[0])


def floor_pow2(exponent: Fraction) -> int:
    """``floor(2**exponent)`` for a non-negative rational exponent."""
    exponent = Fraction(exponent)
    if exponent < 0:
        raise ValueError("exponent must be non-negative")
    p, q = exponent.numerator, exponent.denominator
    return iroot(1 << p, q)


def le_pow2(count: int, exponent: Fraction) -> bool:
    """Exact test ``count <= 2**exponent`` (exponent >= 0)."""
    return count <= floor_pow2(exponent)


def pow2_float(exponent: Fraction) -> float:
    return float(2.0 ** float(exponent))


def _lt_pow2_exact(x: int, y: int, alpha: Fraction) -> bool:
    """Exact ``x < 2**alpha * y`` for integers."""
    p, q = alpha.numerator, alpha.denominator
    if y == 0:
        return x < 0
    if y > 0:
        if x <= 0:
            return True
        lhs, rhs = x ** q, y ** q
        return lhs * (1 << -p) < rhs if p < 0 else lhs < rhs * (1 << p)
    # y < 0, so 2**alpha * y < 0
    if x >= 0:
        return False
    lhs, rhs = (-x) ** q, (-y) ** q
    return lhs * (1 << -p) > rhs if p < 0 else lhs > rhs * (1 << p)


def lt_pow2(x, y, alpha: Fraction) -> np.ndarray:
    """Vectorised exact predicate ``x < 2**alpha * y`` for integer arrays.

    Decided in float64 where the margin is comfortable; near-ties are
    re-decided with Python integers, so the result is exact.
    """
    alpha = Fraction(alpha)
    x = np.asarray(x)
    y = np.asarray(y)
    xf = x.astype(np.float64)
    yf = y.astype(np.float64)
    t = 2.0 ** float(alpha)
    rhs = t * yf
    out = xf < rhs
    scale = np.maximum(np.abs(xf), np.abs(rhs))
    unsure = np.abs(xf - rhs) <= _FILTER * scale
    unsure |= (x.dtype == object) & ~np.isfinite(scale)
    for i in np.flatnonzero(unsure):
        out[i] = _lt_pow2_exact(int(x[i]), int(y[i]), alpha)
    return out


def ceil_fraction(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def floor_fraction(x: Fraction) -> int:
    return x.numerator // x.denominator


def dyadic_floor(x: float | Fraction, bits: int) -> Fraction:
    """Largest multiple of ``2**-bits`` not exceeding ``x``."""
    return Fraction(math.floor(Fraction(x) * (1 << bits)), 1 << bits)


def le_pow2_mul(x, y, e: Fraction) -> np.ndarray:
    """Vectorised exact ``x <= 2**e * y``."""
    return ~lt_pow2(y, x, -Fraction(e))


def frac_phase(j, p: int, q: int) -> np.ndarray:
    """``frac(j * p / q)`` as float64 for an integer array ``j``.

    The product is reduced exactly: with wrapping uint64 arithmetic when ``q``
    is a power of two up to ``2**64``, with Python integers otherwise.
    """
    j = np.asarray(j)
    p = int(p) % q
    if q & (q - 1) == 0 and q <= 1 << 64 and j.dtype != object:
        ju = j.astype(np.int64).view(np.uint64)
        with np.errstate(over="ignore"):
            r = (ju * np.uint64(p)) & np.uint64(q - 1) if q < 1 << 64 else ju * np.uint64(p)
        # split to keep the conversion exact before the final division
        hi = (r >> np.uint64(32)).astype(np.float64) * 4294967296.0
        lo = (r & np.uint64(0xFFFFFFFF)).astype(np.float64)
        return (hi + lo) / float(q)
    flat = [(int(v) * p) % q / q for v in j.ravel().tolist()]
    return np.array(flat, dtype=np.float64).reshape(j.shape)
