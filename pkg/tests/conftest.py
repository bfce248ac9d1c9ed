from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from dyadic_spectra.measure import DyadicMeasure, make_atoms

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@st.composite
def exact_measures(draw, min_K=1, max_K=8, signed=False, max_atoms=24, max_num=50):
    """Random exact atomic measures with small integer-over-denominator weights."""
    K = draw(st.integers(min_K, max_K))
    n = 1 << K
    count = draw(st.integers(1, min(max_atoms, n)))
    cells = draw(st.lists(st.integers(0, n - 1), min_size=count, max_size=count, unique=True))
    lo = -max_num if signed else 1
    nums = draw(st.lists(st.integers(lo, max_num).filter(lambda x: x != 0),
                         min_size=count, max_size=count))
    den = draw(st.integers(1, 64))
    return DyadicMeasure(K, cells, nums, den)


def random_measure(rng, K, atoms, signed=False, max_num=100):
    cells = rng.choice(1 << K, size=atoms, replace=False)
    nums = rng.integers(1, max_num + 1, size=atoms)
    if signed:
        nums = nums * rng.choice([-1, 1], size=atoms)
    return make_atoms(K, {int(c): Fraction(int(w), max_num) for c, w in zip(cells, nums)})


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
