"""Measures on the circle at finite dyadic resolution.

A :class:`DyadicMeasure` of resolution ``K`` is a finite sum of atoms placed at
the left endpoints ``j / 2**K`` of the dyadic cells. Only non-zero atoms are
stored; exact weights are kept as integer numerators over one common
denominator, so sums over cells and tree levels are integer sums.
"""
from __future__ import annotations

import math
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from ._exact import Rational, as_fraction

__all__ = [
    "DyadicMeasure",
    "EmptyIntersectionError",
    "make_dirac",
    "make_uniform",
    "make_sparse",
    "make_atoms",
    "make_cantor",
    "make_riesz_sampled",
    "make_liouville_truncation",
    "liouville_level_intervals",
    "convolve",
    "convolve_power",
    "restrict",
    "jordan_split",
    "coarsen",
    "scale",
]

_INT64_HEADROOM = 1 << 62
MAX_DENSE_K = 22


def _int_array(values: Iterable[int]) -> np.ndarray:
    """int64 when every partial sum is safe, Python ints otherwise."""
    vals = [int(v) for v in values]
    if sum(abs(v) for v in vals) < _INT64_HEADROOM:
        return np.array(vals, dtype=np.int64)
    arr = np.empty(len(vals), dtype=object)
    arr[:] = vals
    return arr


def _group_sum(keys: np.ndarray, vals: np.ndarray, presorted: bool = False):
    """Sum ``vals`` over equal ``keys``; returns (unique keys, sums)."""
    if len(keys) == 0:
        return keys.astype(np.int64), vals
    if not presorted:
        order = np.argsort(keys, kind="stable")
        keys = keys[order]
        vals = vals[order]
    starts = np.concatenate(([0], np.flatnonzero(np.diff(keys)) + 1))
    return keys[starts], np.add.reduceat(vals, starts)


class DyadicMeasure:
    """Signed atomic measure on the ``2**-K`` grid of the circle.

    Parameters
    ----------
    K : int
        Resolution; atoms live at ``j / 2**K`` for ``0 <= j < 2**K``.
    cells : array of int
        Atom positions (grid indices). Duplicates are merged.
    nums : array
        Integer numerators (exact) or float weights (``exact=False``).
    den : int
        Common denominator of the exact weights.
    exact : bool
        False for float-weighted measures (Riesz sampling); exact assertions
        downstream degrade to toleranced ones.
    """

    __slots__ = ("K", "cells", "nums", "den", "exact")

    def __init__(self, K: int, cells, nums, den: int = 1, exact: bool = True):
        if K < 0:
            raise ValueError("resolution K must be >= 0")
        K = int(K)
        cells = np.asarray(cells, dtype=np.int64) % (1 << K) if K < 63 else np.asarray(cells, dtype=np.int64)
        if exact:
            den = int(den)
            if den <= 0:
                raise ValueError("denominator must be positive")
            nums = _int_array(np.asarray(nums).tolist()) if not isinstance(nums, np.ndarray) or nums.dtype != np.int64 else nums
        else:
            nums = np.asarray(nums, dtype=np.float64)
            den = 1
        if len(cells) != len(nums):
            raise ValueError("cells and weights differ in length")
        cells, nums = _group_sum(cells, nums)
        keep = nums != 0
        cells, nums = cells[keep], nums[keep]
        if exact and len(nums):
            if nums.dtype == np.int64:
                g = math.gcd(int(np.gcd.reduce(nums)), den)
            else:
                g = reduce(math.gcd, (int(v) for v in nums), den)
            if g > 1:
                nums = nums // g if nums.dtype == np.int64 else _int_array(int(v) // g for v in nums)
                den //= g
        elif exact:
            den = 1
            nums = np.zeros(0, dtype=np.int64)
        self.K = K
        self.cells = cells
        self.nums = nums
        self.den = den
        self.exact = bool(exact)

    # -- basic views ---------------------------------------------------------
    @property
    def size(self) -> int:
        return 1 << self.K

    @property
    def n_atoms(self) -> int:
        return len(self.cells)

    def _w(self, v):
        return Fraction(int(v), self.den) if self.exact else float(v)

    def atoms(self):
        """Iterate ``(cell, weight)`` over non-zero atoms in cell order."""
        for c, v in zip(self.cells.tolist(), self.nums.tolist()):
            yield c, self._w(v)

    def weight(self, j: int):
        i = np.searchsorted(self.cells, j)
        if i < len(self.cells) and self.cells[i] == j:
            return self._w(self.nums[i])
        return Fraction(0) if self.exact else 0.0

    @property
    def weights(self) -> list:
        """Dense list of all ``2**K`` weights (small K only)."""
        if self.K > 20:
            raise ValueError("dense weights requested for K > 20")
        out = [Fraction(0) if self.exact else 0.0] * self.size
        for c, w in self.atoms():
            out[c] = w
        return out

    def float_weights(self) -> np.ndarray:
        return self.nums.astype(np.float64) / float(self.den) if self.exact else self.nums.copy()

    def dense_float(self) -> np.ndarray:
        if self.K > MAX_DENSE_K:
            raise ValueError(f"dense array requested for K > {MAX_DENSE_K}")
        out = np.zeros(self.size)
        out[self.cells] = self.float_weights()
        return out

    def positions(self) -> list[Fraction]:
        return [Fraction(int(c), self.size) for c in self.cells]

    # -- norms -----------------------------------------------------------------
    def total_variation(self):
        if self.exact:
            return Fraction(sum(abs(int(v)) for v in self.nums), self.den)
        return float(np.sum(np.abs(self.nums)))

    def total_mass(self):
        if self.exact:
            return Fraction(sum(int(v) for v in self.nums), self.den)
        return float(np.sum(self.nums))

    @property
    def is_positive(self) -> bool:
        return bool(np.all(self.nums > 0))

    @property
    def is_zero(self) -> bool:
        return len(self.cells) == 0

    # -- cell masses ---------------------------------------------------------------
    def cell_masses(self, k: int, absolute: bool = False):
        """Masses of the level-``k`` cells carrying atoms.

        Returns ``(cells_k, nums_k)``; exact masses are ``nums_k / den``. With
        ``absolute`` the masses are those of ``|mu|``. Cells whose atoms cancel
        are kept (with mass zero) so that signed trees stay complete.
        """
        if not 0 <= k <= self.K:
            raise ValueError(f"level {k} outside 0..{self.K}")
        nums = abs(self.nums) if absolute else self.nums
        return _group_sum(self.cells >> (self.K - k), nums, presorted=True)

    # -- algebra -----------------------------------------------------------------
    def _new(self, cells, nums, den=None, K=None):
        return DyadicMeasure(self.K if K is None else K, cells, nums,
                             self.den if den is None else den, self.exact)

    def to_float(self) -> "DyadicMeasure":
        if not self.exact:
            return self
        return DyadicMeasure(self.K, self.cells, self.float_weights(), exact=False)

    def coarsen(self, k: int) -> "DyadicMeasure":
        cells, nums = self.cell_masses(k)
        return self._new(cells, nums, K=k)

    def restrict(self, cells: Iterable[int], level: int | None = None) -> "DyadicMeasure":
        """Keep atoms inside the listed cells (given at ``level``, default K)."""
        level = self.K if level is None else level
        sel = np.unique(np.asarray(list(cells) if not isinstance(cells, np.ndarray) else cells, dtype=np.int64))
        mask = np.isin(self.cells >> (self.K - level), sel)
        return self._new(self.cells[mask], self.nums[mask])

    def restrict_mask(self, mask: np.ndarray) -> "DyadicMeasure":
        return self._new(self.cells[mask], self.nums[mask])

    def jordan_split(self) -> tuple["DyadicMeasure", "DyadicMeasure"]:
        pos = self.nums > 0
        return (self._new(self.cells[pos], self.nums[pos]),
                self._new(self.cells[~pos], -self.nums[~pos]))

    def abs(self) -> "DyadicMeasure":
        return self._new(self.cells, abs(self.nums))

    def scale(self, c: Rational) -> "DyadicMeasure":
        if not self.exact:
            return self._new(self.cells, self.nums * float(c))
        c = as_fraction(c)
        return self._new(self.cells, _int_array(int(v) * c.numerator for v in self.nums),
                         den=self.den * c.denominator)

    def __neg__(self):
        return self._new(self.cells, -self.nums)

    def _aligned(self, other: "DyadicMeasure"):
        a, b = self, other
        if a.K > b.K:
            a = a.coarsen(b.K)
        elif b.K > a.K:
            b = b.coarsen(a.K)
        if not (a.exact and b.exact):
            a, b = a.to_float(), b.to_float()
        return a, b

    def __add__(self, other: "DyadicMeasure") -> "DyadicMeasure":
        a, b = self._aligned(other)
        cells = np.concatenate([a.cells, b.cells])
        if a.exact:
            den = a.den * b.den // math.gcd(a.den, b.den)
            nums = _int_array([int(v) * (den // a.den) for v in a.nums]
                              + [int(v) * (den // b.den) for v in b.nums])
            return DyadicMeasure(a.K, cells, nums, den)
        return DyadicMeasure(a.K, cells, np.concatenate([a.nums, b.nums]), exact=False)

    def __sub__(self, other: "DyadicMeasure") -> "DyadicMeasure":
        return self + (-other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, DyadicMeasure):
            return NotImplemented
        return (self.K == other.K and self.exact == other.exact and self.den == other.den
                and np.array_equal(self.cells, other.cells)
                and [v for v in self.nums.tolist()] == [v for v in other.nums.tolist()])

    __hash__ = None

    def __repr__(self) -> str:
        kind = "exact" if self.exact else "float"
        return f"DyadicMeasure(K={self.K}, atoms={self.n_atoms}, {kind}, |mu|={self.total_variation()})"


# -- module-level operations ----------------------------------------------------

def convolve(mu: DyadicMeasure, nu: DyadicMeasure) -> DyadicMeasure:
    """Circular convolution; the finer operand is coarsened first."""
    a, b = mu._aligned(nu)
    mask = (1 << a.K) - 1
    if a.n_atoms == 0 or b.n_atoms == 0:
        return DyadicMeasure(a.K, [], [], exact=a.exact)
    cells = ((a.cells[:, None] + b.cells[None, :]) & mask).ravel()
    if a.exact:
        big = (sum(abs(int(v)) for v in a.nums) * sum(abs(int(v)) for v in b.nums)) >= _INT64_HEADROOM
        an = a.nums.astype(object) if big else a.nums
        bn = b.nums.astype(object) if big else b.nums
        nums = np.multiply.outer(an, bn).ravel()
        return DyadicMeasure(a.K, cells, nums, a.den * b.den)
    return DyadicMeasure(a.K, cells, np.multiply.outer(a.nums, b.nums).ravel(), exact=False)


def convolve_power(mu: DyadicMeasure, m: int, resolution: int | None = None) -> DyadicMeasure:
    """``mu`` convolved with itself ``m`` times (``m = 0`` gives the unit mass at 0).

    Each step re-coarsens to ``resolution`` (default: the base resolution).
    """
    if m < 0:
        raise ValueError("power must be >= 0")
    K = mu.K if resolution is None else resolution
    base = mu.coarsen(K) if mu.K > K else mu
    out = make_dirac(0, K)
    if not base.exact:
        out = out.to_float()
    for _ in range(m):
        out = convolve(out, base)
        if out.K > K:
            out = out.coarsen(K)
    return out


def restrict(mu: DyadicMeasure, cells, level: int | None = None) -> DyadicMeasure:
    return mu.restrict(cells, level)


def jordan_split(mu: DyadicMeasure):
    return mu.jordan_split()


def coarsen(mu: DyadicMeasure, k: int) -> DyadicMeasure:
    return mu.coarsen(k)


def scale(mu: DyadicMeasure, c: Rational) -> DyadicMeasure:
    return mu.scale(c)


# -- constructors ------------------------------------------------------------------

def make_dirac(position: Rational, K: int) -> DyadicMeasure:
    """Unit point mass at ``position`` (must lie on the ``2**-K`` grid)."""
    x = as_fraction(position) % 1
    j = x * (1 << K)
    if j.denominator != 1:
        raise ValueError(f"position {position} is not a multiple of 2**-{K}")
    return DyadicMeasure(K, [int(j)], [1])


def make_uniform(K: int) -> DyadicMeasure:
    """Discrete Haar measure: mass ``2**-K`` on every cell."""
    if K < 0:
        raise ValueError("K must be >= 0")
    if K > 26:
        raise ValueError("uniform measure with more than 2**26 atoms")
    n = 1 << K
    return DyadicMeasure(K, np.arange(n, dtype=np.int64), np.ones(n, dtype=np.int64), n)


def make_sparse(support: Iterable[int], K: int) -> DyadicMeasure:
    """Equal masses ``1/#support`` on the listed cells."""
    cells = sorted({int(c) % (1 << K) for c in support})
    if not cells:
        raise ValueError("support must be non-empty")
    return DyadicMeasure(K, cells, [1] * len(cells), len(cells))


def make_atoms(K: int, weights: dict | Sequence) -> DyadicMeasure:
    """Explicit exact weights, either a dense sequence or ``{cell: weight}``."""
    items = weights.items() if isinstance(weights, dict) else enumerate(weights)
    pairs = [(int(c), as_fraction(w)) for c, w in items]
    if not pairs:
        return DyadicMeasure(K, [], [])
    den = reduce(lambda a, b: a * b // math.gcd(a, b), (w.denominator for _, w in pairs), 1)
    return DyadicMeasure(K, [c for c, _ in pairs], [int(w * den) for _, w in pairs], den)


_MASKS = {"both": (True, True), "left": (True, False), "right": (False, True), "none": (False, False)}


def _mask(entry) -> tuple[bool, bool]:
    if isinstance(entry, str):
        try:
            return _MASKS[entry.lower()]
        except KeyError:
            raise ValueError(f"unknown branch mask {entry!r}") from None
    left, right = entry
    return bool(left), bool(right)


def make_cantor(branch_pattern: Sequence, depth: int) -> DyadicMeasure:
    """Self-similar measure from a per-level child-keep mask.

    ``branch_pattern[i]`` says which children of a level-``i`` cell keep mass
    (``"both"``, ``"left"``, ``"right"`` or a pair of booleans). A pattern
    shorter than ``depth`` is repeated. Mass splits equally among kept children.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    pattern = [_mask(e) for e in branch_pattern]
    if depth and not pattern:
        raise ValueError("empty branch pattern")
    cells = np.zeros(1, dtype=np.int64)
    splits = 0
    for level in range(depth):
        left, right = pattern[level % len(pattern)]
        if not (left or right):
            raise ValueError(f"branch pattern kills all mass at level {level}")
        parts = []
        if left:
            parts.append(2 * cells)
        if right:
            parts.append(2 * cells + 1)
        cells = np.sort(np.concatenate(parts))
        if left and right:
            splits += 1
    return DyadicMeasure(depth, cells, np.ones(len(cells), dtype=np.int64), 1 << splits)


def make_riesz_sampled(k_max: int, K: int) -> DyadicMeasure:
    """Grid samples of ``prod_{k=1}^{k_max} (1 + cos(2 pi 3**k t))``, mass 1.

    Float weights; requires ``3**k_max <= 2**(K-4)`` so the top oscillation is
    resolved by at least 16 samples.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    if k_max and 3 ** k_max > 2 ** (K - 4):
        raise ValueError(f"resolution K={K} too coarse for k_max={k_max}: need 3**k_max <= 2**(K-4)")
    if K > MAX_DENSE_K:
        raise ValueError(f"K={K} exceeds the dense limit {MAX_DENSE_K}")
    n = 1 << K
    j = np.arange(n, dtype=np.int64)
    w = np.ones(n)
    for k in range(1, k_max + 1):
        phase = ((3 ** k) * j) % n  # exact phase reduction
        w *= 1.0 + np.cos(2.0 * np.pi * phase / n)
    w /= w.sum()
    return DyadicMeasure(K, j, w, exact=False)


class EmptyIntersectionError(ValueError):
    """The truncated Liouville intersection has no points."""

    def __init__(self, level: int, M: int, k: int):
        super().__init__(f"intersection became empty at level index {level} (M={M}, k={k})")
        self.level = level
        self.M = M
        self.k = k


def _primes_in_band(M: int) -> list[int]:
    from sympy import primerange

    return list(primerange(M, 2 * M + 1))


def liouville_level_intervals(M: int, k: int) -> list[tuple[Fraction, Fraction]]:
    """Merged closed intervals of ``{x in [0,1] : ||p x|| <= p**(-1-k)}`` over
    primes ``M <= p <= 2M``. Each piece is ``j/p +- p**(-2-k)``."""
    primes = _primes_in_band(M)
    if not primes:
        raise ValueError(f"no prime in [{M}, {2 * M}]")
    raw = []
    for p in primes:
        r = Fraction(1, p ** (k + 2))
        for j in range(p + 1):
            c = Fraction(j, p)
            raw.append((max(c - r, Fraction(0)), min(c + r, Fraction(1))))
    return _merge(raw)


def _merge(intervals):
    out: list[tuple[Fraction, Fraction]] = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


def _intersect(a, b):
    out, i, j = [], 0, 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if lo <= hi:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


def make_liouville_truncation(levels: Sequence[tuple[int, int]], K: int) -> DyadicMeasure:
    """Uniform measure on grid cells meeting a finite Liouville-type intersection.

    ``levels`` lists ``(M_j, k_j)``; the set is the intersection over levels of
    the unions over primes ``p`` in ``[M_j, 2 M_j]`` of ``{||p x|| <= p**(-1-k_j)}``.
    """
    levels = [(int(M), int(k)) for M, k in levels]
    for (m1, _), (m2, _) in zip(levels, levels[1:]):
        if not 2 * m1 < m2:
            raise ValueError("bands must satisfy M_1 < 2 M_1 < M_2 < ...")
    current = [(Fraction(0), Fraction(1))]
    for idx, (M, k) in enumerate(levels):
        current = _intersect(current, liouville_level_intervals(M, k))
        if not current:
            raise EmptyIntersectionError(idx, M, k)
    n = 1 << K
    cells: set[int] = set()
    for lo, hi in current:
        i0 = math.floor(lo * n)
        i1 = math.floor(hi * n)
        for i in range(i0, i1 + 1):
            cells.add(i % n)  # hi == 1 is the point 0 of the circle
    return make_sparse(cells, K)
