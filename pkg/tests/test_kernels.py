import os
import subprocess
import sys
from fractions import Fraction

import numpy as np
import pytest

from dyadic_spectra import _kernels, _pykernels

try:
    from dyadic_spectra import _ckernels
except ImportError:
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def hadamard(n):
    h = np.array([[1]])
    while len(h) < n:
        h = np.block([[h, h], [h, -h]])
    return h


class TestPython:
    @pytest.mark.parametrize("n", [1, 2, 8, 64])
    def test_fwht_matches_matrix(self, n, rng):
        x = rng.integers(-50, 50, size=n)
        assert np.array_equal(_pykernels.fwht(x), hadamard(n) @ x)

    def test_fwht_object_exact(self):
        x = np.array([Fraction(1, 3), Fraction(1, 6), 0, Fraction(-1, 2)], dtype=object)
        want = [sum(int(h) * v for h, v in zip(row, x)) for row in hadamard(4)]
        assert list(_pykernels.fwht(x)) == want

    def test_fwht_involution(self, rng):
        x = rng.standard_normal(256)
        assert np.allclose(_pykernels.fwht(_pykernels.fwht(x)) / 256, x)

    def test_fwht_length_guard(self):
        with pytest.raises(ValueError):
            _pykernels.fwht(np.zeros(6))

    def test_dyadic_fourier_direct(self, rng):
        K = 20
        cells = rng.integers(0, 1 << K, size=15)
        w = rng.random(15)
        f = rng.integers(-10 ** 9, 10 ** 9, size=30)
        want = [sum(wi * np.exp(-2j * np.pi * ((int(fi) * int(c)) % (1 << K)) / (1 << K)) for c, wi in zip(cells, w))
                for fi in f]
        assert np.allclose(_pykernels.dyadic_fourier(f, cells, w, K), want, atol=1e-12)

    def test_jump_energy_direct(self):
        pos, coef, q = np.array([0, 3, 7]), np.array([1.0, -2.5, 1.5]), 16
        want = sum(abs(sum(c * np.exp(-2j * np.pi * j * p / q) for p, c in zip(pos, coef))) ** 2
                   / (4 * np.pi ** 2 * j * j) for j in range(1, 300))
        assert _pykernels.jump_energy(1, 299, q, pos, coef) == pytest.approx(want, rel=1e-12)


class TestDispatchGuards:
    def test_jump_energy_empty_range(self):
        assert _kernels.jump_energy(5, 4, 8, [0], [1.0]) == 0.0

    def test_jump_energy_guards(self):
        with pytest.raises(ValueError):
            _kernels.jump_energy(0, 4, 8, [0], [1.0])
        with pytest.raises(ValueError):
            _kernels.jump_energy(1, 4, 1 << 31, [0], [1.0])

    def test_fourier_resolution_guard(self):
        with pytest.raises(ValueError):
            _kernels.dyadic_fourier([1], [0], [1.0], 32)


@needs_ext
class TestParity:
    @pytest.mark.parametrize("dtype", [np.int64, np.float64])
    def test_fwht(self, rng, dtype):
        for n in (1, 4, 1024):
            x = (rng.integers(-1000, 1000, size=n)).astype(dtype)
            a, b = _ckernels.fwht(x), _pykernels.fwht(x)
            assert np.array_equal(a, b) if dtype is np.int64 else np.allclose(a, b, rtol=0, atol=1e-9)

    def test_fwht_does_not_mutate(self, rng):
        x = rng.integers(-5, 5, size=16).astype(np.int64)
        keep = x.copy()
        _ckernels.fwht(x)
        assert np.array_equal(x, keep)

    @pytest.mark.parametrize("K", [1, 10, 31])
    def test_dyadic_fourier(self, rng, K):
        cells = rng.integers(0, 1 << K, size=40).astype(np.int64)
        w = rng.standard_normal(40)
        f = rng.integers(-(1 << 40), 1 << 40, size=200).astype(np.int64)
        assert np.allclose(_ckernels.dyadic_fourier(f, cells, w, K), _pykernels.dyadic_fourier(f, cells, w, K),
                           rtol=0, atol=1e-10)

    def test_jump_energy(self, rng):
        q = 1 << 20
        pos = rng.integers(0, q, size=5).astype(np.int64)
        coef = rng.standard_normal(5)
        a = _ckernels.jump_energy(1, 100000, q, pos, coef)
        b = _pykernels.jump_energy(1, 100000, q, pos, coef)
        assert a == pytest.approx(b, rel=1e-10)


def test_pure_env_selects_numpy():
    code = "import dyadic_spectra as d; print(d.BACKEND)"
    env = dict(os.environ, DYADIC_SPECTRA_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_backend_reported():
    assert _kernels.BACKEND in ("cython", "python")
    if _ckernels is not None and not os.environ.get("DYADIC_SPECTRA_PURE"):
        assert _kernels.BACKEND == "cython"
