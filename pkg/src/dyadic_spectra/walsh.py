"""Walsh-Stieltjes and Haar coefficients, Lorentz norms and the dimension
diagnostics built on them.

Convention: ``r_i(t) = 1 - 2 * (i-th binary digit of t)``. A finite set
``A`` of positive integers is encoded as ``s(A) = sum_{i in A} 2**(i-1)``,
so the group ``max A = n`` is ``2**(n-1) <= s < 2**n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from ._exact import Rational, as_fraction, floor_pow2
from .martingale import build_tree, c_beta_estimate, classify
from .measure import DyadicMeasure

__all__ = [
    "rademacher",
    "walsh_eval",
    "set_index",
    "index_set",
    "WalshExpansion",
    "WalshHaarMatrix",
    "walsh_coeffs",
    "haar_coeffs",
    "walsh_haar_matrix",
    "lorentz_norm",
    "g_lambda",
    "theorem9_statistic",
    "remark10_aggregates",
    "dimension_bound_check",
]

_MAX_DENSE = 22


def _digit(t: Fraction, i: int) -> int:
    return math.floor(t * (1 << i)) & 1


def rademacher(i: int, t: Rational) -> int:
    if i < 1:
        raise ValueError("Rademacher index starts at 1")
    return 1 - 2 * _digit(as_fraction(t) % 1, i)


def walsh_eval(A: Iterable[int], t: Rational) -> int:
    t = as_fraction(t) % 1
    v = 1
    for i in A:
        v *= rademacher(i, t)
    return v


def set_index(A: Iterable[int]) -> int:
    return sum(1 << (i - 1) for i in set(A))


def index_set(s: int) -> frozenset:
    return frozenset(i + 1 for i in range(int(s).bit_length()) if s >> i & 1)


def _bit_reverse(x: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros_like(x)
    for b in range(n):
        out |= ((x >> b) & 1) << (n - 1 - b)
    return out


def _level_vector(mu: DyadicMeasure, n: int) -> np.ndarray:
    if n > _MAX_DENSE:
        raise ValueError(f"level {n} too fine for a dense vector (max {_MAX_DENSE})")
    cells, nums = mu.cell_masses(n)
    if mu.exact:
        dtype = np.int64 if nums.dtype != object else object
        v = np.zeros(1 << n, dtype=dtype)
        if dtype == object:
            v[:] = 0
    else:
        v = np.zeros(1 << n, dtype=np.float64)
    v[cells] = nums
    return v


def _values(nums, den: int, exact: bool):
    if exact:
        return np.array([Fraction(int(x), den) for x in np.asarray(nums).tolist()], dtype=object)
    return np.asarray(nums, dtype=np.float64)


@dataclass(frozen=True)
class WalshExpansion:
    """Coefficients ``mu^(A)`` for all ``A`` with ``max A <= n_max``.

    ``nums[s] / den`` is the coefficient of the set with index ``s``.
    """

    n_max: int
    nums: np.ndarray
    den: int
    exact: bool
    level_masses: tuple  # numerators of m on every level 0..n_max

    def coeff(self, A: Iterable[int]):
        s = set_index(A)
        if s >= len(self.nums):
            raise KeyError("set exceeds n_max")
        return Fraction(int(self.nums[s]), self.den) if self.exact else float(self.nums[s])

    def group_nums(self, n: int) -> np.ndarray:
        """Numerators of the group ``max A = n`` in index order (``n = 0`` is the empty set)."""
        if not 0 <= n <= self.n_max:
            raise ValueError(f"group {n} outside 0..{self.n_max}")
        return self.nums[: 1] if n == 0 else self.nums[1 << (n - 1): 1 << n]

    def group(self, n: int) -> np.ndarray:
        return _values(self.group_nums(n), self.den, self.exact)

    def parseval(self, n: int) -> tuple:
        """``(sum_{max A <= n} mu^(A)**2, 2**n sum_{F_n} m**2)``, exact for rational measures."""
        lhs = sum(int(x) ** 2 for x in self.nums[: 1 << n].tolist()) if self.exact else \
            float(np.sum(self.nums[: 1 << n] ** 2))
        m = self.level_masses[n]
        rhs = (1 << n) * (sum(int(x) ** 2 for x in m.tolist()) if self.exact else float(np.sum(m ** 2)))
        if self.exact:
            d2 = self.den * self.den
            return Fraction(lhs, d2), Fraction(rhs, d2)
        return lhs, rhs


def walsh_coeffs(mu: DyadicMeasure, n_max: int, check: bool = True) -> WalshExpansion:
    """All Walsh-Stieltjes coefficients up to ``max A = n_max`` via one
    Walsh-Hadamard transform of the level-``n_max`` masses."""
    if not 0 <= n_max <= mu.K:
        raise ValueError(f"n_max must lie in [0, resolution={mu.K}]")
    v = _level_vector(mu, n_max)
    if v.dtype == np.int64 and mu.total_variation() * mu.den >= 1 << 62:
        v = v.astype(object)
    H = _kernels.fwht(v)
    # H[a] uses the bit pattern a over (digit 1 = top bit); reindex by s(A)
    s = np.arange(1 << n_max, dtype=np.int64)
    nums = H[_bit_reverse(s, n_max)]
    levels = tuple(_level_vector(mu, n) for n in range(n_max + 1))
    exp = WalshExpansion(n_max, nums, mu.den, mu.exact, levels)
    if check:
        for n in range(n_max + 1):
            lhs, rhs = exp.parseval(n)
            assert lhs == rhs if mu.exact else math.isclose(lhs, rhs, rel_tol=1e-9, abs_tol=1e-12), \
                f"Parseval fails at level {n}"
    return exp


def haar_coeffs(mu: DyadicMeasure, n: int) -> np.ndarray:
    """``c(w) = m(w0) - m(w1)`` for the ``2**n`` cells of level ``n``
    (index ``j = 2**n + w``)."""
    if not 0 <= n < mu.K:
        raise ValueError(f"need 0 <= n < resolution ({mu.K})")
    child = _level_vector(mu, n + 1)
    diff = child[0::2] - child[1::2]
    return _values(diff, mu.den, mu.exact)


@dataclass(frozen=True)
class WalshHaarMatrix:
    """``c = scale * signs @ x``: group ``max A = n`` to Haar level ``n - 1``.

    Rows are cells ``w`` of level ``n - 1``; columns are ``s`` in
    ``[2**(n-1), 2**n)``. ``signs[w, s] = w_B(w)`` with ``B = A minus {n}``,
    ``scale = 2**-(n-1)``; every row and column has absolute sum 1.
    """

    n: int
    signs: np.ndarray
    scale: Fraction

    @property
    def shape(self):
        return self.signs.shape

    def dense(self) -> np.ndarray:
        return self.signs.astype(np.float64) * float(self.scale)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.dtype == object:
            out = self.signs.astype(object).dot(x)
            return np.array([v * self.scale for v in out.tolist()], dtype=object)
        return self.dense() @ x.astype(np.float64)

    def row_sums(self) -> np.ndarray:
        return np.abs(self.signs).sum(axis=1) * self.scale

    def col_sums(self) -> np.ndarray:
        return np.abs(self.signs).sum(axis=0) * self.scale


def walsh_haar_matrix(n: int) -> WalshHaarMatrix:
    if not 1 <= n <= 13:
        raise ValueError("walsh_haar_matrix supports 1 <= n <= 13")
    size = 1 << (n - 1)
    w = np.arange(size, dtype=np.int64)[:, None]  # level n-1 cell
    b = np.arange(size, dtype=np.int64)[None, :]  # B as s(B), B in {1..n-1}
    parity = np.zeros((size, size), dtype=np.int64)
    for i in range(1, n):
        digit = (w >> (n - 1 - i)) & 1  # i-th binary digit on cell w
        parity ^= digit & ((b >> (i - 1)) & 1)
    signs = (1 - 2 * parity).astype(np.int8)
    mat = WalshHaarMatrix(n, signs, Fraction(1, size))
    assert np.all(mat.row_sums() == 1) and np.all(mat.col_sums() == 1)
    return mat


def lorentz_norm(a, k: int):
    """``||a||_{W(k)}``: sum of the ``k`` largest ``|a_i|``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    arr = np.asarray(a)
    if arr.dtype == object:
        vals = sorted((abs(x) for x in arr.tolist()), reverse=True)
        return sum(vals[:k], Fraction(0) if vals and isinstance(vals[0], Fraction) else 0)
    absd = np.abs(arr.astype(np.float64))
    if k >= len(absd):
        return float(absd.sum())
    return float(np.sort(absd)[::-1][:k].sum())


def _count(lam: Fraction, n: int) -> int:
    return max(1, floor_pow2(lam * n))


def g_lambda(mu_or_expansion, n: int, lam: Rational):
    """Sum of the ``floor(2**(lam n))`` largest ``|mu^(A)|`` over ``max A = n``."""
    lam = as_fraction(lam)
    if not 0 < lam <= 1:
        raise ValueError("lambda must lie in (0, 1]")
    exp = mu_or_expansion if isinstance(mu_or_expansion, WalshExpansion) else walsh_coeffs(mu_or_expansion, n)
    return lorentz_norm(exp.group(n), _count(lam, n))


def _default_theta(beta: Fraction) -> float:
    from .testfn import witness_constant

    alpha = -(1 + math.sqrt(float(beta))) / 2
    alpha_q = Fraction(alpha).limit_denominator(1 << 20)
    return float(witness_constant(alpha_q, -alpha_q))


def theorem9_statistic(mu: DyadicMeasure, beta: Rational, lam: Rational, levels: Sequence[int],
                       theta_c: float | None = None) -> dict:
    """Per Haar level ``n``: ``W(2**(lam n))`` of ``(c_j)`` and of ``(mu^(A))_{max A = n+1}``."""
    beta, lam = as_fraction(beta), as_fraction(lam)
    if not 0 < lam < min(Fraction(1), beta / (1 - beta) if beta < 1 else Fraction(1)):
        raise ValueError("need 0 < lambda < min(1, beta / (1 - beta))")
    levels = list(levels)
    top = max(levels) + 1
    if top >= mu.K + 1:
        raise ValueError("levels must satisfy n + 1 <= resolution")
    exp = walsh_coeffs(mu, top)
    c_beta = c_beta_estimate(mu, beta, mu.K)
    theta = _default_theta(beta) if theta_c is None else float(theta_c)
    rows = []
    for n in levels:
        k = _count(lam, n)
        haar = haar_coeffs(mu, n)
        nxt = haar_coeffs(mu, n + 1) if n + 1 < mu.K else None
        shifted = list(haar[1:]) + ([nxt[0]] if nxt is not None else [])
        h_w = lorentz_norm(haar, k)
        w_w = lorentz_norm(exp.group(n + 1), k)
        rows.append({
            "n": n,
            "count": k,
            "haar_W": h_w,
            "haar_W_shifted": lorentz_norm(np.array(shifted, dtype=haar.dtype), k) if shifted else 0,
            "walsh_W": w_w,
            "walsh_ge_haar": bool(w_w >= h_w),
            "ratio": float(h_w) / float(c_beta) if c_beta else None,
        })
    hits = sum(1 for r in rows if float(r["haar_W"]) > theta * float(c_beta))
    # c_beta -> 0 shows up as monotone decay (at least halving) across the sampled scales
    trend = [c_beta_estimate(mu, beta, n) for n in levels]
    decaying = len(trend) > 1 and all(x >= y for x, y in zip(trend, trend[1:])) and trend[-1] <= trend[0] / 2
    return {
        "rows": rows,
        "c_beta": c_beta,
        "c_beta_by_level": trend,
        "theta_c": theta,
        "levels_above_threshold": hits,
        "vacuous": c_beta == 0 or decaying,
        "comparison_holds": all(r["walsh_ge_haar"] for r in rows),
    }


def _refined(mu: DyadicMeasure) -> DyadicMeasure:
    """Same atoms on the next finer grid (atoms sit at left endpoints)."""
    return DyadicMeasure(mu.K + 1, mu.cells * 2, mu.nums, mu.den, mu.exact)


def remark10_aggregates(mu: DyadicMeasure, beta_prime: Rational, k: int, beta: Rational | None = None,
                        alpha: Rational = Fraction(-1, 2)) -> dict:
    """The four level sums over ``n = ceil((1 - beta') k) .. k``.

    ``S1``: non-turbulent ``|m(w)|``; ``S2``: ``|m(w0) - m(w1)|`` over
    ``m(w) != 0``; ``S3``: Haar ``W(2**(beta n))`` over ``2**(n-1) <= j < 2**n``;
    ``S4``: Walsh ``W(2**(beta n))`` over ``max A = n``.
    """
    bp = as_fraction(beta_prime)
    beta = bp if beta is None else as_fraction(beta)
    if not 0 < bp < 1:
        raise ValueError("beta' must lie in (0, 1)")
    if not 0 <= k <= mu.K:
        raise ValueError("need k <= resolution")
    lo = math.ceil((1 - bp) * k)
    nu = mu if k < mu.K else _refined(mu)
    tree = build_tree(nu.abs() if nu.exact else nu)
    signed_tree = build_tree(nu)
    exp = walsh_coeffs(nu, k)
    S1 = S2 = S3 = S4 = 0
    per_level = []
    for n in range(lo, k + 1):
        cls = classify(tree, n, alpha)
        level_abs = tree.level_sum(n)
        s1 = level_abs - cls.turbulent_mass
        cells, m, m0, m1 = signed_tree.children(n)
        nz = m != 0
        s2 = signed_tree._to_value(np.sum(np.abs(m0[nz] - m1[nz]))) if nz.any() else signed_tree._to_value(0)
        cnt = _count(beta, n) if beta > 0 else 1
        s3 = lorentz_norm(haar_coeffs(nu, n - 1), cnt) if n >= 1 else 0
        s4 = lorentz_norm(exp.group(n), cnt)
        per_level.append({"n": n, "S1": s1, "S2": s2, "S3": s3, "S4": s4, "S3_le_S4": bool(s3 <= s4)})
        S1, S2, S3, S4 = S1 + s1, S2 + s2, S3 + s3, S4 + s4
    c_beta = c_beta_estimate(mu, beta, mu.K)
    scale = bp * k * c_beta
    return {
        "levels": (lo, k),
        "S1": S1, "S2": S2, "S3": S3, "S4": S4,
        "per_level": per_level,
        "c_beta": c_beta,
        "ratios": {name: (float(v) / float(scale) if scale else None)
                   for name, v in (("S1", S1), ("S2", S2), ("S3", S3), ("S4", S4))},
        "S3_le_S4": all(r["S3_le_S4"] for r in per_level),
    }


def _trend(ns: list[int], stats: list[float], zero_tol: float) -> dict:
    vals = np.asarray(stats, dtype=np.float64)
    tail = vals[len(vals) // 2:]
    positive = vals > zero_tol
    slope = None
    if positive.sum() >= 2:
        slope = float(np.polyfit(np.asarray(ns)[positive], np.log2(vals[positive]), 1)[0])
    to_zero = bool(np.all(tail <= zero_tol)) or (slope is not None and slope < 0 and vals[-1] < 0.5 * vals[0])
    return {"log2_slope": slope, "tends_to_zero": to_zero}


def dimension_bound_check(mu: DyadicMeasure, levels: Sequence[int], lam: Rational | None = None,
                          beta: Rational | None = None, beta_prime: Rational | None = None,
                          zero_tol: float = 1e-12) -> dict:
    """Finite-scale diagnostic for the Walsh dimension criteria.

    With ``lam``: the statistic ``||(mu^(A))_{max A = n+1}||_{W(2**(lam n))}``;
    a decaying trend suggests ``dim_M(mu) > lam / (lam + 1)``. With ``beta``
    and ``beta_prime``: ``(1/k) sum_{n=(1-beta')k}^{k} ||(mu^(A))_{max A = n}||_{W(2**(beta n))}``;
    a decaying trend suggests ``dim_M(mu) > beta``. Never a proof.
    """
    levels = list(levels)
    if lam is not None:
        lam = as_fraction(lam)
        exp = walsh_coeffs(mu, max(levels) + 1)
        stats = [float(lorentz_norm(exp.group(n + 1), _count(lam, n))) for n in levels]
        implied = Fraction(lam, lam + 1)
        mode = "lambda"
    elif beta is not None and beta_prime is not None:
        beta, bp = as_fraction(beta), as_fraction(beta_prime)
        exp = walsh_coeffs(mu, max(levels))
        stats = []
        for k in levels:
            lo = math.ceil((1 - bp) * k)
            total = sum(float(lorentz_norm(exp.group(n), _count(beta, n) if beta > 0 else 1))
                        for n in range(max(lo, 0), k + 1))
            stats.append(total / k if k else 0.0)
        implied = beta
        mode = "liminf"
    else:
        raise ValueError("give lam, or beta together with beta_prime")
    trend = _trend(levels, stats, zero_tol)
    return {
        "mode": mode,
        "levels": levels,
        "statistic": stats,
        **trend,
        "implied_lower_bound": implied if trend["tends_to_zero"] else None,
        "label": "finite-scale diagnostic, not a proof",
    }
