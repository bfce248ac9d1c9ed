"""Fourier-Stieltjes coefficients of dyadic measures and of the Riesz product."""
from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from . import _kernels
from ._exact import Rational, as_fraction, frac_phase
from .measure import DyadicMeasure, convolve_power

__all__ = [
    "SpectrumTable",
    "RieszTable",
    "fourier_stieltjes",
    "riesz_exact_coeffs",
    "level_set",
    "range_closure_report",
    "spectral_decay_experiment",
    "conjugate_multiplier",
]

_DENSE_WORK = 1 << 26
_TOL = 1e-12


@dataclass(frozen=True)
class SpectrumTable:
    """``values[i] = mu^(freqs[i])``; ``freqs`` sorted ascending."""

    freqs: np.ndarray
    values: np.ndarray
    source: str = ""

    def __getitem__(self, n: int) -> complex:
        i = int(np.searchsorted(self.freqs, n))
        if i == len(self.freqs) or self.freqs[i] != n:
            raise KeyError(f"frequency {n} outside the table")
        return complex(self.values[i])

    def __len__(self) -> int:
        return len(self.freqs)

    def sup_abs(self, exclude_zero: bool = True) -> float:
        mask = self.freqs != 0 if exclude_zero else np.ones(len(self.freqs), dtype=bool)
        return float(np.max(np.abs(self.values[mask]))) if mask.any() else 0.0


def _freq_array(N_or_freqs) -> np.ndarray:
    if np.isscalar(N_or_freqs):
        N = int(N_or_freqs)
        if N < 0:
            raise ValueError("window N must be non-negative")
        return np.arange(-N, N + 1, dtype=np.int64)
    return np.asarray(N_or_freqs, dtype=np.int64)


def fourier_stieltjes(mu: DyadicMeasure, N_or_freqs, check: bool = True) -> SpectrumTable:
    """``mu^(n) = sum_j w_j exp(-2 pi i n j / 2**K)`` over ``[-N, N]`` or the given frequencies.

    Phases are reduced exactly modulo ``2**K``. Dense measures with large
    windows go through one FFT of the weight vector.
    """
    freqs = _freq_array(N_or_freqs)
    order = np.argsort(freqs, kind="stable")
    sorted_freqs = freqs[order]
    w = mu.float_weights()
    if mu.is_zero:
        vals = np.zeros(len(freqs), dtype=np.complex128)
    elif mu.n_atoms * len(freqs) > _DENSE_WORK and mu.K <= 22:
        spec = np.fft.fft(mu.dense_float())
        vals = spec[np.mod(freqs, mu.size)]
    elif mu.K <= 31:
        vals = _kernels.dyadic_fourier(freqs, mu.cells.astype(np.int64), w, mu.K)
    else:
        vals = np.zeros(len(freqs), dtype=np.complex128)
        for c, x in zip(mu.cells.tolist(), w.tolist()):
            vals += x * np.exp(-2j * np.pi * frac_phase(freqs, int(c), mu.size))
    table = SpectrumTable(sorted_freqs, np.asarray(vals)[order], f"fourier_stieltjes(K={mu.K})")
    if check:
        _check_spectrum(mu, table)
    return table


def _check_spectrum(mu: DyadicMeasure, table: SpectrumTable) -> None:
    tv = float(mu.total_variation())
    tol = _TOL * max(1.0, tv) * max(1.0, np.sqrt(mu.n_atoms))
    assert np.all(np.abs(table.values) <= tv + tol), "|mu^| exceeds ||mu||"
    f, v = table.freqs, table.values
    neg = np.searchsorted(f, -f)
    has = (neg < len(f)) & (f[np.minimum(neg, len(f) - 1)] == -f)
    assert np.allclose(v[has], np.conj(v[neg[has]]), rtol=0, atol=tol), "Hermitian symmetry fails"
    zero = f == 0
    if zero.any() and mu.is_positive:
        assert abs(v[zero][0] - tv) <= tol, "mu^(0) differs from ||mu||"


# -- Riesz product --------------------------------------------------------------------------

class RieszTable:
    """Exact coefficients of ``prod_{k=1}^{k_max} (1 + cos(2 pi 3**k t))``.

    ``mu^(n) = 2**-#S`` when ``n = sum_{k in S} e_k 3**k`` with ``e_k = +-1``,
    and ``0`` otherwise. Lookup decodes ``n`` in balanced ternary; ``expand``
    multiplies the factors out and is the independent construction.
    """

    max_k = 20

    def __init__(self, k_max: int):
        if not 0 <= k_max <= self.max_k:
            raise ValueError(f"k_max must lie in [0, {self.max_k}], got {k_max}")
        self.k_max = k_max
        self.reach = (3 ** (k_max + 1) - 3) // 2

    def digits(self, n: int) -> list[int] | None:
        """Balanced-ternary digits of ``n`` at powers ``1..k_max`` (``None`` if not representable)."""
        n = int(n)
        out = []
        for _ in range(self.k_max + 1):
            r = n % 3
            d = r if r < 2 else -1
            out.append(d)
            n = (n - d) // 3
        if n != 0 or out[0] != 0:
            return None
        return out[1:]

    def coeff(self, n: int) -> Fraction:
        d = self.digits(n)
        if d is None:
            return Fraction(0)
        return Fraction(1, 1 << sum(1 for x in d if x))

    def values(self, freqs) -> np.ndarray:
        """Float coefficients for an integer array (vectorised decode)."""
        n = np.asarray(freqs, dtype=np.int64).copy()
        count = np.zeros(n.shape, dtype=np.int64)
        ok = np.ones(n.shape, dtype=bool)
        for pos in range(self.k_max + 1):
            r = np.mod(n, 3)
            d = np.where(r == 2, -1, r)
            if pos == 0:
                ok &= d == 0
            count += d != 0
            n = (n - d) // 3
        ok &= n == 0
        return np.where(ok, np.ldexp(1.0, -count), 0.0)

    def expand(self) -> dict[int, Fraction]:
        """Multiply the factors out: ``{n: coefficient}`` over all sign patterns."""
        if self.k_max > 13:
            raise ValueError("product expansion limited to k_max <= 13")
        table = {0: Fraction(1)}
        for k in range(1, self.k_max + 1):
            step = 3 ** k
            nxt: dict[int, Fraction] = {}
            for n, c in table.items():
                nxt[n] = nxt.get(n, 0) + c
                nxt[n + step] = nxt.get(n + step, 0) + c / 2
                nxt[n - step] = nxt.get(n - step, 0) + c / 2
            table = nxt
        return table

    def table(self, N: int | None = None) -> SpectrumTable:
        N = self.reach if N is None else int(N)
        f = np.arange(-N, N + 1, dtype=np.int64)
        return SpectrumTable(f, self.values(f).astype(np.complex128), f"riesz(k_max={self.k_max})")

    def __repr__(self) -> str:
        return f"RieszTable(k_max={self.k_max})"


def riesz_exact_coeffs(k_max: int) -> RieszTable:
    return RieszTable(k_max)


def level_set(table, q: Rational | complex, tol: float = 0.0, window: int | None = None) -> list[int]:
    """Frequencies in the window with ``|mu^(n) - q| <= tol``.

    Symbolic tables answer by enumerating signed sums of ``m`` distinct powers
    of three when ``q = 2**-m`` (exact, ``tol`` ignored).
    """
    if isinstance(table, RieszTable):
        q = as_fraction(q) if not isinstance(q, complex) else q
        N = table.reach if window is None else int(window)
        if isinstance(q, Fraction) and q > 0 and q.numerator == 1 and q.denominator & (q.denominator - 1) == 0:
            m = q.denominator.bit_length() - 1
            if m > table.k_max:
                return []
            out = set()
            for S in itertools.combinations(range(1, table.k_max + 1), m):
                for signs in itertools.product((1, -1), repeat=m):
                    n = sum(s * 3 ** k for s, k in zip(signs, S))
                    if abs(n) <= N:
                        out.add(n)
            return sorted(out)
        if q == 0:
            f = np.arange(-N, N + 1, dtype=np.int64)
            return f[table.values(f) == 0].tolist()
        return []
    vals = table.values
    return table.freqs[np.abs(vals - complex(q)) <= tol].tolist()


def _cluster_1d(x: np.ndarray, tol: float) -> list[np.ndarray]:
    order = np.argsort(x, kind="stable")
    cut = np.flatnonzero(np.diff(x[order]) > tol) + 1
    return np.split(order, cut)


def range_closure_report(table, tol: float = 1e-9) -> list[tuple[object, int]]:
    """Distinct values of a table with multiplicities, ascending.

    Symbolic tables give an exact census over the window. Float tables are
    clustered by gaps larger than ``tol``, first in the real part, then in the
    imaginary part; each cluster is reported by its mean.
    """
    if isinstance(table, RieszTable):
        f = np.arange(-table.reach, table.reach + 1, dtype=np.int64)
        counts = Counter(table.values(f).tolist())
        return sorted((Fraction(v), c) for v, c in counts.items())
    v = np.asarray(table.values)
    out = []
    for group in _cluster_1d(v.real, tol):
        for sub in _cluster_1d(v.imag[group], tol):
            idx = group[sub]
            mean = complex(np.mean(v[idx]))
            out.append((mean.real if abs(mean.imag) <= tol else mean, len(idx)))
    return sorted(out, key=lambda t: (complex(t[0]).real, complex(t[0]).imag))


# -- decay experiment -------------------------------------------------------------------------

def spectral_decay_experiment(mu: DyadicMeasure, m_max: int, N: int, beta: Rational,
                              alpha: Rational, rho: Rational, eta: Rational = Fraction(1, 100)) -> dict:
    """Contrast ``sup_{1<=|n|<=N} |(mu^{*m})^(n)|`` with the witness bound for ``mu^{*m}``."""
    from .testfn import prop2_pipeline

    if not mu.is_positive or mu.is_zero:
        raise ValueError("spectral_decay_experiment needs a nonzero positive measure")
    freqs = np.concatenate([np.arange(-N, 0), np.arange(1, N + 1)]).astype(np.int64)
    base = fourier_stieltjes(mu, freqs)
    base_sup = float(np.max(np.abs(base.values))) if N > 0 else 0.0
    rows = []
    for m in range(1, m_max + 1):
        nu = convolve_power(mu, m, resolution=mu.K)
        spec = fourier_stieltjes(nu, freqs)
        sup = float(np.max(np.abs(spec.values))) if N > 0 else 0.0
        rep = prop2_pipeline(nu, beta, alpha, rho, eta)
        rows.append({
            "m": m,
            "sup": sup,
            "sup_power": base_sup ** m,
            "bound": rep.effective_bound,
            "c_beta": rep.c_beta,
            "achieved": rep.achieved,
            "vacuous": rep.vacuous,
            "n_atoms": nu.n_atoms,
        })
    sups = [r["sup"] for r in rows]
    bounds = [r["bound"] for r in rows]
    return {
        "rows": rows,
        "sup_strictly_decreasing": all(a > b for a, b in zip(sups, sups[1:])),
        "bound_floor_ratio": (min(bounds) / bounds[0]) if bounds and bounds[0] > 0 else 0.0,
        "note": "finite-scale cell counts only; lower and upper Minkowski dimension are not distinguished",
    }


def conjugate_multiplier(freqs, coeffs=None):
    """Apply ``f^(j) -> -i sgn(j) f^(j)`` (``sgn(0) = 0``).

    Accepts ``(freqs, coeffs)`` arrays or a single :class:`SpectrumTable`.
    """
    if isinstance(freqs, SpectrumTable):
        t = freqs
        return SpectrumTable(t.freqs, -1j * np.sign(t.freqs) * t.values, f"conjugate({t.source})")
    f = np.asarray(freqs, dtype=np.int64)
    return -1j * np.sign(f) * np.asarray(coeffs)
