import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadic_spectra.measure import (
    make_atoms,
    make_cantor,
    make_dirac,
    make_sparse,
    make_uniform,
)
from dyadic_spectra.testfn import (
    BandPolynomial,
    StepFunction,
    TestFunctionHn,
    band_norm_experiment,
    band_projection_and_polynomial,
    band_tail_energies,
    convolve_hn,
    hn_derivative_measure,
    hn_fourier,
    make_hn,
    prop2_pipeline,
    witness_constant,
)

from conftest import exact_measures, random_measure

HALF = Fraction(1, 2)


@st.composite
def hn_params(draw, max_n=14):
    n = draw(st.integers(0, max_n))
    bits = n + draw(st.integers(2, 12))
    top = (1 << (bits - n - 1)) - 1  # eps < 2**(-n-1)
    num = draw(st.integers(1, top))
    return n, Fraction(num, 1 << bits)


def riemann_l1(f: StepFunction, points: int) -> float:
    t = (np.arange(points) + 0.5) / points
    return float(np.mean(np.abs(f.sample(t))))


class TestHn:
    def test_small_case_closed_form(self):
        h = make_hn(3, Fraction(1, 64))
        # plateaus 2**6 (1/16 -+ 1/64) on lengths 1/16 +- 1/64
        assert h.l1 == HALF - Fraction(1, 32)
        assert h.integral == 0
        assert h.linf == 2 ** 6 * (Fraction(1, 16) + Fraction(1, 64)) <= 8

    def test_epsilon_range(self):
        with pytest.raises(ValueError):
            make_hn(3, Fraction(1, 16))
        with pytest.raises(ValueError):
            make_hn(3, 0)

    def test_reflection(self):
        h = make_hn(2, Fraction(1, 32))
        g = h.reflect()
        for k in range(64):
            t = Fraction(k, 64) + Fraction(1, 256)
            assert h(t) == g(-t)

    def test_pointwise_matches_blocks(self):
        h = make_hn(2, Fraction(1, 32), "reflected")
        a = Fraction(1, 8)
        assert h(0) == h.c1
        assert h(a) == -h.c2
        assert h(2 * a - Fraction(1, 32)) == 0
        assert h(-Fraction(1, 32)) == h.c1


@given(hn_params(), st.sampled_from(["direct", "reflected"]))
def test_hn_identities(params, orientation):
    n, eps = params
    h = TestFunctionHn(n, eps, orientation)
    assert h.integral == 0
    assert h.l1 == HALF - eps * eps * 2 ** (2 * n + 1)
    assert h.linf == 2 ** (2 * n) * (Fraction(1, 2 ** (n + 1)) + eps) <= 2 ** n
    assert h.support_length == Fraction(1, 2 ** n)
    assert h.l2_squared == 2 ** (4 * n) * ((h.a - eps) ** 2 * (h.a + eps) + (h.a + eps) ** 2 * (h.a - eps))


class TestConvolution:
    def test_dirac_translate(self):
        h = make_hn(5, Fraction(3, 1024))
        f = convolve_hn(h, make_dirac(Fraction(5, 16), 6))
        assert f.l1() == h.l1
        assert f(Fraction(5, 16)) == h(0)
        assert f.integral() == 0

    def test_uniform_cancels(self):
        n, K = 4, 14
        h = make_hn(n, Fraction(1, 128))
        f = convolve_hn(h, make_uniform(K))
        assert f.l1() < Fraction(1, 2 ** K) * 2 ** (n + 2)
        assert abs(riemann_l1(f, 8 * f.scale) - float(f.l1())) < 1e-12

    def test_two_atoms_two_ways(self):
        n = 5
        h = make_hn(n, Fraction(1, 256))
        mu = make_atoms(n + 1, {0: HALF, 1: HALF})
        f = convolve_hn(h, mu)
        assert abs(riemann_l1(f, 4 * f.scale) - float(f.l1())) < 1e-10

    def test_integrate_abs_wraps(self):
        f = StepFunction(4, [0, 1, 2, 3], [1, -2, 3, -4])
        assert f.integrate_abs(0, 1) == f.l1() == Fraction(10, 4)
        assert f.integrate_abs(Fraction(7, 8), Fraction(9, 8)) == Fraction(4 + 1, 8)
        assert f.integrate_abs(Fraction(1, 8), Fraction(17, 8)) == 2 * f.l1()

    def test_float_measure_rejected(self):
        with pytest.raises(ValueError):
            convolve_hn(make_hn(2, Fraction(1, 32)), make_uniform(3).to_float())


@given(exact_measures(max_K=10, signed=True), hn_params(max_n=6))
def test_young_and_mean(mu, params):
    n, eps = params
    h = make_hn(n, eps)
    f = convolve_hn(h, mu)
    assert f.l1() <= h.l1 * mu.total_variation()
    assert f.integral() == 0


def test_young_five_hundred_random(rng):
    for _ in range(500):
        n = int(rng.integers(0, 7))
        h = make_hn(n, Fraction(int(rng.integers(1, 1 << 4)), 1 << (n + 5)))
        mu = random_measure(rng, int(rng.integers(1, 11)), 1, signed=True) if rng.random() < 0.1 else \
            random_measure(rng, 10, int(rng.integers(1, 40)), signed=True)
        assert convolve_hn(h, mu).l1() <= h.l1 * mu.total_variation()


@pytest.mark.parametrize("K_dense", [8, 12, 16, 20])
def test_step_l1_against_riemann(K_dense, rng):
    h = make_hn(3, Fraction(3, 256))
    mu = random_measure(rng, 9, 25, signed=True)
    f = convolve_hn(h, mu)
    approx = riemann_l1(f, 1 << K_dense)
    bound = float(f.total_variation()) / 2 ** K_dense
    assert abs(approx - float(f.l1())) <= bound + 1e-12


class TestFourier:
    def test_zero_frequency(self):
        assert hn_fourier(make_hn(3, Fraction(1, 64)), 0) == 0

    def test_against_quadrature(self):
        h = make_hn(3, Fraction(1, 64))
        N = 1 << 16
        t = (np.arange(N) + 0.5) / N
        vals = np.array([float(h(Fraction(k * 2 + 1, 2 * N))) for k in range(N)])
        for j in (1, 2, 5, -7, 40):
            quad = np.mean(vals * np.exp(-2j * np.pi * j * t))
            assert abs(quad - hn_fourier(h, j)) < 1e-4

    @pytest.mark.parametrize("n", [2, 5, 9])
    def test_decay_bounds(self, n):
        h = make_hn(n, Fraction(1, 2 ** (n + 3)))
        j = np.arange(1, 2 ** n + 1)
        vals = np.abs(hn_fourier(h, j))
        assert np.all(vals <= 2 * np.pi * j * 2.0 ** -n + 1e-15)
        jj = np.arange(1, 2 ** (2 * n + 2))
        assert np.all(np.abs(hn_fourier(h, jj)) <= 3 * 2 ** n / (2 * np.pi * jj))

    def test_derivative_measure(self, rng):
        h = make_hn(4, Fraction(1, 128), "reflected")
        nu = hn_derivative_measure(h)
        assert nu.total() == 0
        assert sorted(nu.weights) == sorted([h.c1, -Fraction(2 ** 4), h.c2])
        j = rng.integers(-10 ** 6, 10 ** 6, size=100)
        j = j[j != 0]
        assert np.allclose(nu.fourier(j), 2j * np.pi * j * hn_fourier(h, j), atol=1e-9)
        assert np.all(np.abs(nu.fourier(j)) < 3 * 2 ** 4)
        assert abs(nu.fourier(1) - 2j * np.pi * hn_fourier(h, 1)) < 1e-12

    def test_parseval_partial_sums(self):
        n = 3
        h = make_hn(n, Fraction(1, 64))
        N = 2 ** (2 * n + 4)
        j = np.arange(1, N + 1)
        e = np.abs(hn_fourier(h, j)) ** 2
        partial = 2 * np.cumsum(e)
        assert np.all(np.diff(partial) >= 0)
        total = float(h.l2_squared)
        assert partial[-1] <= total and partial[-1] >= 0.99 * total


class TestBands:
    def test_low_band_empty(self):
        b = band_tail_energies(make_hn(8, Fraction(1, 2 ** 11)), Fraction(1, 10 ** 6), 10 ** 4, terms=1 << 10)
        assert b.low == 0 and b.low_cut == 0

    def test_stated_bounds_n8(self):
        h = make_hn(8, Fraction(1, 2 ** 11))
        b = band_tail_energies(h, Fraction(1, 25), 10 ** 4)
        assert b.low < 8 * math.pi ** 2 * 0.04 ** 3
        assert b.high_upper < 18 / 10 ** 4
        assert b.high_sum <= b.high_upper

    def test_band_energy_against_direct_sum(self):
        h = make_hn(5, Fraction(1, 2 ** 8))
        b = band_tail_energies(h, Fraction(1, 2), Fraction(1, 4), terms=2000)
        j = np.arange(1, b.low_cut + 1)
        assert abs(b.low - 2 * np.sum(np.abs(hn_fourier(h, j)) ** 2)) < 1e-14
        j = np.arange(b.high_start, b.high_stop + 1)
        assert abs(b.high_sum - 2 * np.sum(np.abs(hn_fourier(h, j)) ** 2)) < 1e-12

    def test_polynomial_truncation_guard(self):
        with pytest.raises(ValueError, match="truncation too small"):
            BandPolynomial(make_hn(3, Fraction(1, 64)), Fraction(1, 10), 2, 100)

    def test_polynomial_identities(self):
        n = 4
        h = make_hn(n, Fraction(1, 2 ** 7))
        a, b = Fraction(1, 2), Fraction(1, 4)
        poly, check = band_projection_and_polynomial(h, a, b, 2 ** 9)
        assert check["ok"] and check["negative_nonzero"] == 0
        j, phi = poly.phi_table()
        assert abs(np.sum(np.abs(phi) ** 2) - poly.phi_norm_sq()) < 1e-12
        energies = band_tail_energies(h, a, b, terms=2 ** 9 - poly.hi)
        assert abs(poly.phi_norm_sq() - (energies.low + energies.high_sum)) < 1e-12
        jj = np.arange(-poly.N_max, poly.N_max + 1)
        p = poly.p_coeff(jj)
        assert np.all(p[jj < 0] == 0)
        inside = poly.in_band(jj) & (jj > 0)
        assert np.allclose(p[inside], 2 * hn_fourier(h, jj[inside]), rtol=1e-13, atol=0)
        assert np.all(p[~inside] == 0)


class TestWitnessPipeline:
    def test_dirac(self):
        rep = prop2_pipeline(make_dirac(0, 10), 0, -HALF, HALF, Fraction(1, 100))
        expected = 2 ** -6 * (2 ** 0.5 - 1) ** 2 * (1 / 8) ** 2 * 0.5
        assert rep.bound == pytest.approx(expected, rel=1e-12)
        assert rep.passed and rep.premise.holds
        assert rep.achieved == make_hn(rep.n, rep.epsilon).l1
        assert float(rep.achieved) > 0.49

    @pytest.mark.parametrize("pattern", [["both", "left"], ["left", "both"], ["both", "right"]])
    def test_cantor(self, pattern):
        mu = make_cantor(pattern, 24)
        rep = prop2_pipeline(mu, Fraction(11, 20), Fraction(-3, 4), Fraction(4, 5), Fraction(1, 100))
        assert rep.passed, rep.failed_steps()
        assert rep.premise.holds
        assert float(rep.achieved) >= rep.bound

    def test_uniform_vacuous(self):
        rep = prop2_pipeline(make_uniform(12), Fraction(1, 4), -HALF, Fraction(3, 4), Fraction(1, 100))
        assert rep.vacuous and rep.passed and rep.effective_bound == 0

    def test_chain_names(self):
        rep = prop2_pipeline(make_sparse([3, 700, 901], 12), Fraction(1, 4), -HALF, Fraction(3, 4),
                             Fraction(1, 100))
        names = [s.name for s in rep.chain]
        assert names[0] == "s1_restrict_to_E" and names[-2:] == ["final", "young"]
        assert [s.asserted for s in rep.chain if s.name.startswith("s2")] == [False]

    def test_precondition(self):
        with pytest.raises(ValueError):
            prop2_pipeline(make_dirac(0, 4), HALF, -HALF, HALF, Fraction(1, 100))

    def test_witness_constant(self):
        assert float(witness_constant(-HALF, HALF)) == pytest.approx(
            2 ** -6 * (2 ** 0.5 - 1) ** 2 / 64 / 2, rel=1e-14)

    def test_signed_measure(self):
        mu = make_atoms(12, {5: -1, 2000: Fraction(1, 10)})
        rep = prop2_pipeline(mu, 0, -HALF, HALF, Fraction(1, 100))
        assert rep.sign == -1 and rep.passed


class TestBandNorm:
    def test_dirac_ratio_one(self):
        out = band_norm_experiment(make_dirac(0, 8), 0, -HALF, HALF, Fraction(1, 2), 16, n=3,
                                   epsilon=Fraction(1, 64))
        assert out["ratio"] == pytest.approx(1.0, abs=1e-12)
        assert out["triangle_holds"]

    def test_sparse_triangle(self):
        mu = make_sparse([0, 5, 1000], 12)
        out = band_norm_experiment(mu, 0, -HALF, HALF, Fraction(1, 2), 16, n=3, epsilon=Fraction(1, 64))
        assert out["triangle_holds"]
        assert out["C2_empirical"] == 1.0 and out["C1_empirical"] > 0

    def test_warning_flag(self):
        out = band_norm_experiment(make_dirac(0, 8), 0, -HALF, HALF, Fraction(1, 2), 16, n=3,
                                   epsilon=Fraction(1, 64))
        assert out["warning_band_too_narrow"]
