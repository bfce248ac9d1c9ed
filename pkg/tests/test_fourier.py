import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given

from dyadic_spectra.fourier import (
    RieszTable,
    SpectrumTable,
    conjugate_multiplier,
    fourier_stieltjes,
    level_set,
    range_closure_report,
    riesz_exact_coeffs,
    spectral_decay_experiment,
)
from dyadic_spectra.measure import (
    DyadicMeasure,
    convolve,
    make_dirac,
    make_riesz_sampled,
    make_sparse,
    make_uniform,
)

from conftest import exact_measures, random_measure


def direct_transform(mu, freqs):
    """Plain Python oracle: sum_j w_j exp(-2 pi i n j / 2**K) with the phase reduced in ints."""
    out = []
    for n in freqs:
        s = 0j
        for c, w in mu.atoms():
            s += float(w) * np.exp(-2j * np.pi * ((int(n) * c) % mu.size) / mu.size)
        out.append(s)
    return np.array(out)


class TestTransform:
    def test_dirac(self):
        t = fourier_stieltjes(make_dirac(0, 8), 50)
        assert np.allclose(t.values, 1)

    def test_uniform_geometric_sum(self):
        K = 5
        t = fourier_stieltjes(make_uniform(K), 200)
        expected = np.where(t.freqs % (1 << K) == 0, 1.0, 0.0)
        assert np.allclose(t.values, expected, atol=1e-13)

    def test_matches_direct_oracle(self, rng):
        mu = random_measure(rng, 14, 20, signed=True)
        freqs = np.sort(rng.integers(-10 ** 6, 10 ** 6, size=40))
        assert np.allclose(fourier_stieltjes(mu, freqs).values, direct_transform(mu, freqs), atol=1e-12)

    def test_dense_path_agrees(self, rng):
        # enough work to switch to the FFT path
        mu = random_measure(rng, 14, 9000)
        freqs = np.arange(-8000, 8001)
        fast = fourier_stieltjes(mu, freqs)
        pick = rng.choice(len(freqs), size=30, replace=False)
        assert np.allclose(fast.values[pick], direct_transform(mu, freqs[pick]), atol=1e-12)

    def test_huge_resolution_exact_phase(self):
        K = 40
        mu = DyadicMeasure(K, [1, 3 << 30], [1, 1], 2)
        freqs = np.sort(np.array([-7, 1, 2 ** 39, 2 ** 40 - 1, 123456789012]))
        got = fourier_stieltjes(mu, freqs).values
        want = direct_transform(mu, freqs)
        assert np.allclose(got, want, atol=1e-12)

    def test_lookup_outside_window(self):
        t = fourier_stieltjes(make_dirac(0, 3), 4)
        with pytest.raises(KeyError):
            t[5]


@given(exact_measures(max_K=12, signed=True), exact_measures(max_K=12))
def test_convolution_theorem(mu, nu):
    freqs = np.arange(-60, 61) * 37
    lhs = fourier_stieltjes(convolve(mu, nu), freqs).values
    a, b = mu._aligned(nu)
    rhs = fourier_stieltjes(a, freqs).values * fourier_stieltjes(b, freqs).values
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * max(1.0, float(mu.total_variation() * nu.total_variation()))


@given(exact_measures(max_K=10))
def test_spectrum_invariants(mu):
    t = fourier_stieltjes(mu, 100, check=False)
    tv = float(mu.total_variation())
    assert np.all(np.abs(t.values) <= tv * (1 + 1e-12))
    assert np.allclose(t.values[::-1], np.conj(t.values), atol=1e-12)
    assert abs(t[0] - tv) < 1e-12


class TestRiesz:
    def test_coefficients(self):
        t = riesz_exact_coeffs(5)
        assert t.coeff(0) == 1
        assert t.coeff(3) == Fraction(1, 2)
        assert t.coeff(12) == Fraction(1, 4)
        assert t.coeff(2) == 0
        assert t.coeff(1) == 0

    def test_two_unrepresentable_by_enumeration(self):
        k = 6
        sums = {sum(e * 3 ** i for e, i in zip(signs, S))
                for m in range(k + 1) for S in itertools.combinations(range(1, k + 1), m)
                for signs in itertools.product((1, -1), repeat=m)}
        assert 2 not in sums

    @pytest.mark.parametrize("k", [0, 1, 3, 7])
    def test_range(self, k):
        t = riesz_exact_coeffs(k)
        values = {v for v, _ in range_closure_report(t)}
        expected = {Fraction(1)} | {Fraction(1, 2 ** m) for m in range(1, k + 1)}
        if k:  # with no factors the window is {0} alone
            expected.add(Fraction(0))
        assert values == expected

    @pytest.mark.parametrize("k", [1, 4, 9])
    def test_expansion_matches_decode(self, k):
        t = RieszTable(k)
        expanded = {n: c for n, c in t.expand().items() if c}
        f = np.arange(-t.reach, t.reach + 1)
        decoded = t.values(f)
        for n, v in zip(f.tolist(), decoded.tolist()):
            assert Fraction(v) == expanded.get(n, 0) == t.coeff(n)

    def test_quarter_level_set(self):
        k = 7
        t = riesz_exact_coeffs(k)
        got = set(level_set(t, Fraction(1, 4)))
        want = {s1 * 3 ** a + s2 * 3 ** b for a in range(1, k + 1) for b in range(1, k + 1) if a != b
                for s1 in (1, -1) for s2 in (1, -1)}
        assert got == want
        f = t.table().freqs
        assert got == set(f[t.values(f) == 0.25].tolist())

    def test_trivial_level_sets(self):
        t = riesz_exact_coeffs(4)
        assert level_set(t, 1) == [0]
        assert level_set(t, Fraction(3, 10)) == []

    def test_too_many_factors(self):
        with pytest.raises(ValueError):
            RieszTable(21)

    @pytest.mark.parametrize("k", [1, 2, 3, 4])
    def test_symbolic_matches_sampled(self, k):
        sampled = fourier_stieltjes(make_riesz_sampled(k, 14), 100)
        exact = RieszTable(k).values(sampled.freqs)
        assert np.max(np.abs(sampled.values - exact)) < 1e-3


class TestRangeReport:
    def test_dirac(self):
        assert range_closure_report(fourier_stieltjes(make_dirac(0, 4), 20)) == [(1.0, 41)]

    def test_float_clustering_idempotent(self):
        vals = np.array([0.0, 1e-13, 0.5, 0.5 + 2e-13, 1.0, 1.0], dtype=np.complex128)
        t = SpectrumTable(np.arange(6), vals)
        a = range_closure_report(t, tol=1e-9)
        b = range_closure_report(t, tol=5e-10)
        assert [c for _, c in a] == [c for _, c in b] == [2, 2, 2]


class TestConjugate:
    def test_cosine_to_sine(self):
        f = np.array([-1, 0, 1])
        out = conjugate_multiplier(f, np.array([0.5, 0, 0.5]))
        # sin(2 pi t) = (e(t) - e(-t)) / 2i
        assert np.allclose(out, [0.5j, 0, -0.5j])

    def test_constant_and_square(self):
        f = np.arange(-5, 6)
        c = np.where(f == 0, 3.0, 0.0)
        assert np.all(conjugate_multiplier(f, c) == 0)
        x = np.linspace(-1, 1, 11) + 1j
        twice = conjugate_multiplier(f, conjugate_multiplier(f, x))
        assert np.allclose(twice, -np.where(f == 0, 0, x))

    def test_table_form(self):
        t = fourier_stieltjes(make_sparse([1, 2], 3), 4)
        out = conjugate_multiplier(t)
        assert np.allclose(out.values, -1j * np.sign(t.freqs) * t.values)


class TestDecay:
    def test_dirac_control(self):
        rep = spectral_decay_experiment(make_dirac(0, 10), 3, 64, 0, Fraction(-1, 2), Fraction(1, 2))
        assert [r["sup"] for r in rep["rows"]] == [1.0, 1.0, 1.0]
        assert rep["bound_floor_ratio"] == 1.0

    def test_uniform_control(self):
        rep = spectral_decay_experiment(make_uniform(8), 2, 300, Fraction(1, 4), Fraction(-1, 2), Fraction(3, 4))
        assert rep["rows"][0]["sup"] == pytest.approx(1.0)  # n = 256 is inside the window
        rep = spectral_decay_experiment(make_uniform(8), 2, 200, Fraction(1, 4), Fraction(-1, 2), Fraction(3, 4))
        assert rep["rows"][0]["sup"] < 1e-12
        assert all(r["vacuous"] for r in rep["rows"])

    def test_square_positions(self):
        mu = make_sparse([j * j for j in range(7)], 16)
        rep = spectral_decay_experiment(mu, 4, 4096, Fraction(1, 2), Fraction(-3, 4), Fraction(4, 5))
        assert rep["sup_strictly_decreasing"]
        assert rep["bound_floor_ratio"] > 0.5
