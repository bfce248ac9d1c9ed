from fractions import Fraction

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from dyadic_spectra._exact import (
    as_fraction,
    ceil_fraction,
    dyadic_floor,
    floor_pow2,
    frac_phase,
    iroot,
    le_pow2_mul,
    lt_pow2,
)


def test_as_fraction_parses_strings_exactly():
    assert as_fraction("0.75") == Fraction(3, 4)
    assert as_fraction("-3/4") == Fraction(-3, 4)
    assert as_fraction(5) == 5


@given(st.integers(0, 10 ** 30), st.integers(1, 7))
def test_iroot_brackets(value, q):
    c = iroot(value, q)
    assert c ** q <= value < (c + 1) ** q


@given(st.fractions(min_value=0, max_value=40, max_denominator=30))
def test_floor_pow2_matches_high_precision(e):
    import mpmath

    with mpmath.workdps(80):
        exact = int(mpmath.floor(mpmath.power(2, mpmath.mpf(e.numerator) / e.denominator)))
    # exact powers of two can round either side in mpmath; the integer check settles it
    f = floor_pow2(e)
    assert f ** e.denominator <= 2 ** e.numerator < (f + 1) ** e.denominator
    assert abs(f - exact) <= 1


def test_floor_pow2_large_exponent_is_fast():
    # thousands of bits with a non-integer exponent
    f = floor_pow2(Fraction(4001, 29))
    assert f ** 29 <= 2 ** 4001 < (f + 1) ** 29


@given(st.integers(-10 ** 6, 10 ** 6), st.integers(-10 ** 6, 10 ** 6),
       st.fractions(min_value=-3, max_value=3, max_denominator=12))
def test_lt_pow2_is_exact(x, y, alpha):
    got = bool(lt_pow2(np.array([x]), np.array([y]), alpha)[0])
    # compare x < 2**alpha * y by raising to the denominator power
    p, q = alpha.numerator, alpha.denominator
    if y == 0:
        want = x < 0
    elif y > 0:
        want = x <= 0 or Fraction(x) ** q < Fraction(2) ** p * Fraction(y) ** q
    else:
        want = x < 0 and Fraction(-x) ** q > Fraction(2) ** p * Fraction(-y) ** q
    assert got == want


def test_lt_pow2_on_exact_tie():
    # 1 < 2**(-1/2) * 2 is true; 2 < 2**(1/2) * ... ties: 2 == 2**1 * 1
    assert not lt_pow2(np.array([2]), np.array([1]), Fraction(1))[0]
    assert le_pow2_mul(np.array([2]), np.array([1]), Fraction(1))[0]


def test_ceil_and_dyadic_floor():
    assert ceil_fraction(Fraction(7, 2)) == 4
    assert ceil_fraction(Fraction(-7, 2)) == -3
    assert dyadic_floor(Fraction(1, 3), 4) == Fraction(5, 16)


@given(st.lists(st.integers(-2 ** 62, 2 ** 62), min_size=1, max_size=20), st.integers(0, 40),
       st.integers(0, 2 ** 40))
def test_frac_phase_matches_integer_reduction(js, k, p):
    q = 1 << k
    got = frac_phase(np.array(js, dtype=np.int64), p, q)
    want = np.array([(j * p) % q / q for j in js])
    assert np.array_equal(got, want)


def test_frac_phase_non_power_of_two():
    got = frac_phase(np.array([1, 2, 3, -1]), 1, 3)
    assert np.allclose(got, [1 / 3, 2 / 3, 0.0, 2 / 3])
