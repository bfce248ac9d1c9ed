from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dyadic_spectra.fourier import fourier_stieltjes
from dyadic_spectra.measure import (
    DyadicMeasure,
    EmptyIntersectionError,
    convolve,
    convolve_power,
    liouville_level_intervals,
    make_atoms,
    make_cantor,
    make_dirac,
    make_liouville_truncation,
    make_riesz_sampled,
    make_sparse,
    make_uniform,
)
from dyadic_spectra.martingale import c_beta_estimate

from conftest import exact_measures


class TestConstructors:
    def test_dirac_weights(self):
        mu = make_dirac(0, 4)
        assert mu.weights == [1] + [0] * 15
        assert make_dirac(Fraction(1, 2), 1).weights == [0, 1]
        assert make_dirac(0, 10).total_variation() == 1

    def test_dirac_off_grid_rejected(self):
        with pytest.raises(ValueError, match="not a multiple"):
            make_dirac(Fraction(1, 3), 4)

    def test_uniform(self):
        assert make_uniform(2).weights == [Fraction(1, 4)] * 4
        assert make_uniform(6).total_variation() == 1

    def test_uniform_invariant_under_translation(self):
        u = make_uniform(5)
        assert convolve(u, make_dirac(Fraction(3, 32), 5)) == u

    def test_sparse(self):
        assert make_sparse([0], 6) == make_dirac(0, 6)
        mu = make_sparse([1, 5, 9], 4)
        assert mu.weights[5] == Fraction(1, 3)
        with pytest.raises(ValueError):
            make_sparse([], 3)

    def test_sparse_initial_segment_is_class_member(self):
        from dyadic_spectra.martingale import check_class_membership

        k = 12
        mu = make_sparse(range(1 << 6), k)  # 2**ceil(k/2) cells
        assert check_class_membership(mu, Fraction(1, 2), k).member

    def test_sparse_square_positions_concentrated(self):
        K = 16
        mu = make_sparse([j * j for j in range(7)], K)
        # a single coarse cell carries everything: top-1 mass equals 1 at scale 0
        assert c_beta_estimate(mu, 0, 0) == 1
        assert c_beta_estimate(mu, Fraction(1, 4), K) == 1

    def test_cantor_special_cases(self):
        assert make_cantor(["both"], 5) == make_uniform(5)
        assert make_cantor(["left"], 5) == make_dirac(0, 5)

    def test_cantor_alternating(self):
        d = 5
        mu = make_cantor(["both", "left"], 2 * d)
        assert mu.n_atoms == 2 ** d
        assert set(mu.nums.tolist()) == {1} and mu.den == 2 ** d

    def test_cantor_dead_pattern(self):
        with pytest.raises(ValueError, match="kills all mass"):
            make_cantor([(False, False)], 3)

    def test_riesz_sampled(self):
        assert np.allclose(make_riesz_sampled(0, 6).float_weights(), 1 / 64)
        mu = make_riesz_sampled(2, 12)
        t = fourier_stieltjes(mu, [3, 12, 0])
        assert abs(t[3] - 0.5) < 1e-3
        assert abs(t[12] - 0.25) < 1e-3
        assert abs(mu.total_mass() - 1) < 1e-12
        assert np.all(mu.nums >= 0)

    def test_riesz_sampled_too_coarse(self):
        with pytest.raises(ValueError, match="too coarse"):
            make_riesz_sampled(4, 8)

    def test_liouville_empty_levels_is_uniform(self):
        assert make_liouville_truncation([], 6) == make_uniform(6)

    def test_liouville_one_level_matches_interval_oracle(self):
        K = 12
        mu = make_liouville_truncation([(5, 1)], K)
        # oracle: cell i survives iff [i, i+1]/2**K meets some j/p +- p**-3
        n = 1 << K
        keep = set()
        for p in (5, 7):
            r = Fraction(1, p ** 3)
            for j in range(p + 1):
                lo, hi = Fraction(j, p) - r, Fraction(j, p) + r
                for i in range(n):
                    if Fraction(i, n) <= hi and Fraction(i + 1, n) >= lo:
                        keep.add(i)
        # the constructor uses closed cells [i/n, (i+1)/n] too, clipped to [0, 1]
        assert set(mu.cells.tolist()) == keep
        pieces = liouville_level_intervals(5, 1)
        assert all(lo <= hi for lo, hi in pieces)

    def test_liouville_two_levels_shrink(self):
        K = 14
        one = make_liouville_truncation([(5, 1)], K)
        two = make_liouville_truncation([(5, 1), (11, 1)], K)
        assert two.n_atoms < one.n_atoms

    def test_liouville_zero_always_survives(self):
        mu = make_liouville_truncation([(5, 1), (11, 2), (23, 3)], 12)
        assert mu.weight(0) > 0

    def test_liouville_empty_intersection_reports_level(self, monkeypatch):
        import dyadic_spectra.measure as m

        def fake(M, k):
            return [(Fraction(0), Fraction(1, 10))] if M == 5 else [(Fraction(1, 2), Fraction(3, 5))]

        monkeypatch.setattr(m, "liouville_level_intervals", fake)
        with pytest.raises(EmptyIntersectionError) as exc:
            m.make_liouville_truncation([(5, 1), (11, 1)], 8)
        assert exc.value.level == 1 and exc.value.M == 11


class TestAlgebra:
    def test_restrict_jordan_coarsen(self):
        mu = make_atoms(1, [1, -2])
        assert mu.restrict(range(2)) == mu
        p, n = mu.jordan_split()
        assert p.weights == [1, 0] and n.weights == [0, 2]
        assert make_uniform(4).coarsen(2) == make_uniform(2)

    def test_convolution_identities(self):
        mu = make_atoms(5, {3: Fraction(1, 3), 17: Fraction(2, 3)})
        assert convolve(make_dirac(0, 5), mu) == mu
        a, b = Fraction(3, 8), Fraction(7, 8)
        assert convolve(make_dirac(a, 5), make_dirac(b, 5)) == make_dirac((a + b) % 1, 5)

    def test_convolution_coarsens_finer_operand(self):
        mu = make_dirac(Fraction(1, 8), 3)
        nu = make_dirac(Fraction(5, 16), 4)
        out = convolve(mu, nu)
        assert out.K == 3
        assert out == make_dirac(Fraction(3, 8), 3)

    def test_convolve_power(self):
        mu = make_sparse([0, 1], 4)
        assert convolve_power(mu, 0) == make_dirac(0, 4)
        assert convolve_power(mu, 2).weights[:3] == [Fraction(1, 4), Fraction(1, 2), Fraction(1, 4)]

    def test_convolution_theorem_random_frequencies(self, rng):
        from conftest import random_measure

        mu = random_measure(rng, 12, 30, signed=True)
        nu = random_measure(rng, 12, 25)
        freqs = rng.integers(-5000, 5000, size=50)
        lhs = fourier_stieltjes(convolve(mu, nu), freqs, check=False)
        a = fourier_stieltjes(mu, freqs, check=False)
        b = fourier_stieltjes(nu, freqs, check=False)
        for f in freqs:
            assert abs(lhs[int(f)] - a[int(f)] * b[int(f)]) < 1e-12

    def test_float_measure_equality_flags(self):
        mu = make_dirac(0, 3)
        assert mu.to_float().exact is False
        assert mu.to_float() != mu


@given(exact_measures(max_K=10))
def test_coarsen_preserves_mass(mu):
    for k in range(mu.K + 1):
        c = mu.coarsen(k)
        assert c.total_mass() == mu.total_mass()
        assert c.total_variation() == mu.total_variation()


@given(exact_measures(max_K=9, signed=True))
def test_jordan_split_norms(mu):
    p, n = mu.jordan_split()
    assert p - n == mu
    assert mu.total_variation() == p.total_variation() + n.total_variation()


@given(exact_measures(max_K=7), exact_measures(max_K=7))
def test_convolution_mass_multiplies(mu, nu):
    out = convolve(mu, nu)
    assert out.total_mass() == mu.total_mass() * nu.total_mass()
    assert out.is_positive or out.is_zero


@given(exact_measures(max_K=9, signed=True), st.data())
def test_restrict_then_sum(mu, data):
    level = data.draw(st.integers(0, mu.K))
    cells = data.draw(st.lists(st.integers(0, (1 << level) - 1), max_size=8))
    r = mu.restrict(cells, level)
    rest = mu.restrict(sorted(set(range(1 << level)) - set(cells)), level)
    assert r + rest == mu


def test_construct_rejects_mismatched_lengths():
    with pytest.raises(ValueError):
        DyadicMeasure(3, [0, 1], [1])


def test_mass_conservation_thousand_random(rng):
    from conftest import random_measure

    for _ in range(1000):
        K = int(rng.integers(2, 11))
        mu = random_measure(rng, K, int(rng.integers(1, min(40, 1 << K) + 1)))
        nu = random_measure(rng, K, int(rng.integers(1, min(8, 1 << K) + 1)))
        k = int(rng.integers(0, K + 1))
        assert mu.coarsen(k).total_mass() == mu.total_mass()
        assert convolve(mu, nu).total_mass() == mu.total_mass() * nu.total_mass()
        cells = rng.choice(1 << k, size=max(1, (1 << k) // 2), replace=False)
        inside = mu.restrict(cells, k)
        outside = mu.restrict(np.setdiff1d(np.arange(1 << k), cells), k)
        assert inside.total_mass() + outside.total_mass() == mu.total_mass()
