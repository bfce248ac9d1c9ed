"""Dyadic martingale of a measure and the combinatorics built on it.

``m(omega)`` is the mass of the dyadic interval ``omega``; level ``n`` holds the
``2**n`` intervals of length ``2**-n``. A vertex is *turbulent* for a parameter
``-1 < alpha < 0`` when both children carry strictly less than ``2**alpha``
of its mass.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from ._exact import (
    Rational,
    as_fraction,
    ceil_fraction,
    floor_pow2,
    le_pow2_mul,
    lt_pow2,
)
from .measure import DyadicMeasure

__all__ = [
    "MartingaleTree",
    "VertexClassification",
    "SrCounts",
    "MountainRiverResult",
    "MountainRiverError",
    "Membership",
    "CoverFamily",
    "CoverError",
    "MeasureSplit",
    "build_tree",
    "classify",
    "s_r_counts",
    "lemma_bounds",
    "river_parameters",
    "mountain_river_search",
    "check_class_membership",
    "c_beta_estimate",
    "c_beta_family",
    "select_cover",
    "isolate_positive_part",
]


class MartingaleTree:
    """Cell masses of a measure on every level ``0..K`` of the binary tree.

    Each level stores the cells that carry atoms underneath (sorted) and their
    masses as numerators over ``den``. Unlisted vertices have mass zero. The
    path ``gamma(omega)`` of a level-``n`` cell ``w`` is ``w >> (n - i)`` for
    ``i = 0..n``.
    """

    def __init__(self, mu: DyadicMeasure):
        self.depth = mu.K
        self.den = mu.den
        self.exact = mu.exact
        levels = [None] * (mu.K + 1)
        cells, nums = mu.cells, mu.nums
        levels[mu.K] = (cells, nums)
        for n in range(mu.K - 1, -1, -1):
            cells, nums = _reduce_parent(cells, nums)
            levels[n] = (cells, nums)
        self._levels = levels

    def level(self, n: int):
        return self._levels[n]

    def mass(self, n: int, w: int):
        cells, nums = self._levels[n]
        i = np.searchsorted(cells, w)
        v = nums[i] if i < len(cells) and cells[i] == w else 0
        return Fraction(int(v), self.den) if self.exact else float(v)

    def level_masses(self, n: int) -> list:
        """Dense list of the ``2**n`` masses (small n only)."""
        if n > 20:
            raise ValueError("dense level requested for n > 20")
        out = [self.mass(n, 0) * 0] * (1 << n)
        cells, nums = self._levels[n]
        for c, v in zip(cells.tolist(), nums.tolist()):
            out[c] = Fraction(int(v), self.den) if self.exact else float(v)
        return out

    def level_sum(self, n: int):
        return self._to_value(self._levels[n][1].sum() if len(self._levels[n][1]) else 0)

    def children(self, n: int):
        """Arrays ``(cells, m, m0, m1)`` for the listed vertices of level ``n``."""
        if not 0 <= n < self.depth:
            raise ValueError(f"level {n} has no children inside depth {self.depth}")
        cells, nums = self._levels[n]
        ccells, cnums = self._levels[n + 1]
        zero = np.zeros(1, dtype=cnums.dtype)[0]
        return cells, nums, _lookup(ccells, cnums, 2 * cells, zero), _lookup(ccells, cnums, 2 * cells + 1, zero)

    def path(self, n: int, w: int) -> list[tuple[int, int]]:
        return [(i, w >> (n - i)) for i in range(n + 1)]

    def _to_value(self, v):
        return Fraction(int(v), self.den) if self.exact else float(v)

    def __repr__(self) -> str:
        return f"MartingaleTree(depth={self.depth}, root={self.mass(0, 0)})"


def _reduce_parent(cells, nums):
    parents = cells >> 1
    if len(parents) == 0:
        return parents, nums
    starts = np.concatenate(([0], np.flatnonzero(np.diff(parents)) + 1))
    return parents[starts], np.add.reduceat(nums, starts)


def _lookup(cells, nums, keys, zero):
    idx = np.searchsorted(cells, keys)
    idx_c = np.minimum(idx, max(len(cells) - 1, 0))
    if len(cells) == 0:
        out = np.empty(len(keys), dtype=nums.dtype)
        out[:] = zero
        return out
    hit = cells[idx_c] == keys
    out = np.where(hit, nums[idx_c], zero)
    if nums.dtype == object:
        out = out.astype(object)
    return out


def build_tree(mu: DyadicMeasure) -> MartingaleTree:
    return MartingaleTree(mu)


# -- classification ------------------------------------------------------------------

def _check_alpha(alpha) -> Fraction:
    alpha = as_fraction(alpha)
    if not -1 < alpha < 0:
        raise ValueError(f"alpha must lie in (-1, 0), got {alpha}")
    return alpha


def _below(tree: MartingaleTree, x, y, alpha: Fraction) -> np.ndarray:
    """``x < 2**alpha * y`` elementwise, exact for exact trees."""
    if tree.exact:
        return lt_pow2(x, y, alpha)
    return np.asarray(x, dtype=float) < 2.0 ** float(alpha) * np.asarray(y, dtype=float)


@dataclass(frozen=True)
class VertexClassification:
    """Partition of level ``n`` into turbulent / descent / ascent / zero vertices.

    Cell arrays list vertices by index. ``zero`` holds listed ties; every
    unlisted vertex (mass zero everywhere below) is also in the zero class, see
    ``zero_count``.
    """

    level: int
    alpha: Fraction
    turbulent: np.ndarray
    descent: np.ndarray
    ascent: np.ndarray
    zero: np.ndarray
    turbulent_mass: Fraction | float
    descent_gap: Fraction | float  # sum over descent of m0 - m1
    ascent_gap: Fraction | float  # sum over ascent of m1 - m0
    descent_mass: Fraction | float = 0
    ascent_mass: Fraction | float = 0

    @property
    def size(self) -> int:
        return 1 << self.level

    @property
    def zero_count(self) -> int:
        return self.size - len(self.turbulent) - len(self.descent) - len(self.ascent)


def classify(tree: MartingaleTree, n: int, alpha: Rational) -> VertexClassification:
    alpha = _check_alpha(alpha)
    cells, m, m0, m1 = tree.children(n)
    turb = _below(tree, m0, m, alpha) & _below(tree, m1, m, alpha)
    desc = ~turb & (m0 > m1)
    asc = ~turb & (m0 < m1)
    tie = ~turb & ~desc & ~asc
    val = tree._to_value

    def total(x):
        return val(x.sum()) if len(x) else val(0)

    return VertexClassification(
        level=n,
        alpha=alpha,
        turbulent=cells[turb],
        descent=cells[desc],
        ascent=cells[asc],
        zero=cells[tie],
        turbulent_mass=total(m[turb]),
        descent_gap=total(m0[desc] - m1[desc]),
        ascent_gap=total(m1[asc] - m0[asc]),
        descent_mass=total(m[desc]),
        ascent_mass=total(m[asc]),
    )


@dataclass(frozen=True)
class SrCounts:
    """Turbulent-ancestor counts ``S_r`` for the listed level-``k`` leaves.

    ``lhs`` is the turbulent mass summed over levels ``r+1..k-1``; ``rhs`` is
    ``sum m(leaf) * S_r(leaf)``. They agree exactly (``identity_holds``).
    """

    r: int
    k: int
    leaves: np.ndarray
    masses: np.ndarray
    counts: np.ndarray
    lhs: Fraction | float
    rhs: Fraction | float

    @property
    def identity_holds(self) -> bool:
        return self.lhs == self.rhs


def _turbulent_sets(tree, alpha, levels):
    return {n: classify(tree, n, alpha) for n in levels}


def s_r_counts(tree: MartingaleTree, alpha: Rational, r: int, k: int,
               classes: dict | None = None) -> SrCounts:
    alpha = _check_alpha(alpha)
    if not (0 <= r <= k - 2 and k <= tree.depth):
        raise ValueError(f"need 0 <= r <= k-2 and k <= depth; got r={r}, k={k}, depth={tree.depth}")
    classes = classes if classes is not None else _turbulent_sets(tree, alpha, range(r + 1, k))
    leaves, masses = tree.level(k)
    counts = np.zeros(len(leaves), dtype=np.int64)
    lhs = 0
    for n in range(r + 1, k):
        c = classes[n]
        counts += np.isin(leaves >> (k - n), c.turbulent)
        lhs = lhs + c.turbulent_mass
    rhs = tree._to_value(np.sum(masses * counts)) if len(leaves) else tree._to_value(0)
    return SrCounts(r, k, leaves, masses, counts, lhs if lhs != 0 else tree._to_value(0), rhs)


def lemma_bounds(tree: MartingaleTree, alpha: Rational, r: int, k: int, rho_prime: Rational,
                 counts: SrCounts | None = None) -> dict:
    """Evaluate the two halves of the averaging argument on a concrete tree.

    ``I`` sums ``m * S_r`` over leaves with ``S_r <= floor(rho' (k-r))`` and is
    bounded by ``rho' (k-r) |mu|``. For ``II`` the per-leaf ingredient
    ``m(leaf) <= 2**(alpha S_r) |mu|`` is checked exactly.
    """
    alpha = _check_alpha(alpha)
    rho_prime = as_fraction(rho_prime)
    counts = counts or s_r_counts(tree, alpha, r, k)
    total_num = tree.level(0)[1].sum() if len(tree.level(0)[1]) else 0
    cut = (rho_prime * (k - r)).numerator // (rho_prime * (k - r)).denominator
    low = counts.counts <= cut
    val = tree._to_value
    part_one = val(np.sum(counts.masses[low] * counts.counts[low])) if low.any() else val(0)
    part_two = val(np.sum(counts.masses[~low] * counts.counts[~low])) if (~low).any() else val(0)
    bound_one = rho_prime * (k - r) * val(total_num)
    if tree.exact:
        per_leaf = [bool(le_pow2_mul(np.array([int(m)], dtype=object), np.array([int(total_num)], dtype=object),
                                     alpha * int(j))[0])
                    for m, j in zip(counts.masses.tolist(), counts.counts.tolist())]
    else:
        per_leaf = [m <= 2.0 ** (float(alpha) * j) * float(total_num) * (1 + 1e-12)
                    for m, j in zip(counts.masses.tolist(), counts.counts.tolist())]
    return {
        "cut": cut,
        "I": part_one,
        "I_bound": bound_one,
        "I_holds": part_one <= bound_one,
        "II": part_two,
        "II_leaf_decay_holds": all(per_leaf),
    }


# -- Mountain River --------------------------------------------------------------------

class MountainRiverError(ValueError):
    """No level in the search window has small turbulent mass."""

    def __init__(self, message: str, turbulent_mass_by_level: dict, r: int | None = None):
        super().__init__(message)
        self.turbulent_mass_by_level = turbulent_mass_by_level
        self.r = r


@dataclass(frozen=True)
class MountainRiverResult:
    n: int
    turbulent_mass: Fraction | float
    theta: Fraction
    r: int
    k: int
    rho_prime: Fraction
    total_mass: Fraction | float
    turbulent_mass_by_level: dict = field(default_factory=dict)


def river_parameters(beta: Rational, alpha: Rational, rho: Rational, k: int) -> tuple[Fraction, int]:
    """``(rho', r)`` used by the search.

    ``rho'`` is the midpoint of ``rho`` and ``max(-beta/alpha, 0)``;
    ``r = ceil(k (alpha rho' + beta) / (alpha rho'))`` clamped to ``k - 2``.
    """
    beta, alpha, rho = as_fraction(beta), _check_alpha(alpha), as_fraction(rho)
    if not 0 < rho < 1:
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if alpha * rho + beta >= 0:
        raise ValueError(f"need alpha*rho + beta < 0, got {alpha * rho + beta}")
    crit = max(-beta / alpha, Fraction(0))
    rho_prime = (rho + crit) / 2
    r = ceil_fraction(k * (alpha * rho_prime + beta) / (alpha * rho_prime))
    return rho_prime, max(0, min(r, k - 2))


def mountain_river_search(mu: DyadicMeasure, beta: Rational, alpha: Rational, rho: Rational, k: int,
                          tree: MartingaleTree | None = None) -> MountainRiverResult:
    """Smallest level ``n`` in ``(r, k-1]`` whose turbulent mass is below ``rho |mu|``."""
    beta, alpha, rho = as_fraction(beta), _check_alpha(alpha), as_fraction(rho)
    if not mu.is_positive:
        raise ValueError("mountain river search needs a positive measure")
    if k > mu.K or k < 2:
        raise ValueError(f"need 2 <= k <= resolution ({mu.K}), got {k}")
    rho_prime, r = river_parameters(beta, alpha, rho, k)
    member = check_class_membership(mu, beta, k)
    if not member.member:
        raise ValueError(f"measure is not in M(beta={beta}, k={k}): {member.count} > 2**(beta k)")
    tree = tree or build_tree(mu)
    total = mu.total_variation()
    threshold = rho * total if mu.exact else float(rho) * total
    by_level = {}
    for n in range(r + 1, k):
        tm = classify(tree, n, alpha).turbulent_mass
        by_level[n] = tm
        if tm < threshold:
            return MountainRiverResult(n, tm, Fraction(r, k), r, k, rho_prime, total, by_level)
    raise MountainRiverError(
        f"no level in ({r}, {k - 1}] has turbulent mass below rho*|mu| (k may be below k0)",
        by_level, r)


# -- class membership and c_beta -----------------------------------------------------------

@dataclass(frozen=True)
class Membership:
    member: bool
    count: int
    bound: int  # floor(2**(beta k))


def check_class_membership(mu: DyadicMeasure, beta: Rational, k: int) -> Membership:
    beta = as_fraction(beta)
    _, nums = mu.cell_masses(k)
    count = int(np.count_nonzero(nums))
    bound = floor_pow2(beta * k)
    return Membership(count <= bound, count, bound)


def c_beta_family(mu: DyadicMeasure, beta: Rational, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Level-``k`` cells of the ``floor(2**(beta k))`` largest ``|mu|`` masses.

    Ties are broken towards lower cell index. Returns ``(cells, |mu| numerators)``.
    """
    beta = as_fraction(beta)
    cells, nums = mu.cell_masses(k, absolute=True)
    cap = floor_pow2(beta * k)
    keys = np.asarray(nums, dtype=np.float64)
    order = np.lexsort((cells, -keys))
    if mu.exact and nums.dtype == object:
        order = np.array(sorted(range(len(cells)), key=lambda i: (-nums[i], cells[i])), dtype=np.int64)
    elif mu.exact:
        order = np.lexsort((cells, -nums))
    top = order[:cap]
    return cells[top], nums[top]


def c_beta_estimate(mu: DyadicMeasure, beta: Rational, k: int):
    """Finite-scale c_beta: the ``|mu|``-mass of the ``floor(2**(beta k))``
    heaviest level-``k`` cells."""
    _, nums = c_beta_family(mu, beta, k)
    s = nums.sum() if len(nums) else 0
    return Fraction(int(s), mu.den) if mu.exact else float(s)


# -- covers ------------------------------------------------------------------------------------

class CoverError(ValueError):
    def __init__(self, message: str, per_scale: list):
        super().__init__(message)
        self.per_scale = per_scale


@dataclass(frozen=True)
class CoverFamily:
    """Equal-length dyadic cells chosen for a pair of mutually singular measures.

    Conditions: ``#D <= floor(2**(beta k))`` (``count_ok``), ``nu1(D) >
    c_beta(nu1)/2 - tau`` and ``nu2(D + [-delta, delta]) < tau``. Both the
    half and the full ``c_beta - tau`` targets are reported.
    """

    k: int
    d: Fraction
    cells: np.ndarray
    delta: Fraction
    tau: Fraction
    beta: Fraction
    nu1_mass: Fraction
    nu2_margin_mass: Fraction
    c_beta_ref: Fraction
    strict_size: float  # #D * d**beta
    conditions: dict

    @property
    def half_target(self) -> Fraction:
        return self.c_beta_ref / 2 - self.tau

    @property
    def full_target(self) -> Fraction:
        return self.c_beta_ref - self.tau

    def to_dict(self) -> dict:
        return {
            "k": self.k, "d": self.d, "delta": self.delta, "tau": self.tau, "beta": self.beta,
            "cells": [int(c) for c in self.cells],
            "nu1_mass": self.nu1_mass, "nu2_margin_mass": self.nu2_margin_mass,
            "c_beta_ref": self.c_beta_ref,
            "half_cbeta_minus_tau": self.half_target,
            "cbeta_minus_tau": self.full_target,
            "strict_size": self.strict_size,
            "conditions": dict(self.conditions),
        }


def _wrapped_range(cells: np.ndarray, lo: int, hi: int, n: int) -> np.ndarray:
    """Positions in ``cells`` (sorted, values in [0, n)) of points in [lo, hi] mod n."""
    if hi - lo + 1 >= n:
        return np.arange(len(cells))
    lo_m, hi_m = lo % n, hi % n
    if lo_m <= hi_m:
        a, b = np.searchsorted(cells, lo_m, "left"), np.searchsorted(cells, hi_m, "right")
        return np.arange(a, b)
    a = np.searchsorted(cells, lo_m, "left")
    b = np.searchsorted(cells, hi_m, "right")
    return np.concatenate([np.arange(a, len(cells)), np.arange(0, b)])


def margin_mass(nu2: DyadicMeasure, cells: Iterable[int], k: int, delta: Rational) -> Fraction:
    """``nu2`` mass of the union of closed enlargements ``omega + [-delta, delta]``."""
    delta = as_fraction(delta)
    n = nu2.size
    covered = np.zeros(nu2.n_atoms, dtype=bool)
    width = n >> k
    for c in cells:
        lo = Fraction(int(c) * width) - delta * n
        hi = Fraction((int(c) + 1) * width) + delta * n
        covered[_wrapped_range(nu2.cells, -((-lo.numerator) // lo.denominator),
                               hi.numerator // hi.denominator, n)] = True
    return Fraction(int(nu2.nums[covered].sum()) if covered.any() else 0, nu2.den)


def select_cover(nu1: DyadicMeasure, nu2: DyadicMeasure, beta: Rational, tau: Rational,
                 scales: Iterable[int] | None = None,
                 margin: Rational | Callable[[int], Rational] | None = None) -> CoverFamily:
    """Greedy equal-length cover, tried from the finest scale downwards.

    At scale ``k`` the heaviest ``nu1`` cells are taken in order, skipping any
    whose ``delta``-enlargement would push the ``nu2`` mass of the covered set
    to ``tau`` or above, until ``floor(2**(beta k))`` cells are chosen. The
    margin ``delta`` defaults to one cell width.
    """
    beta, tau = as_fraction(beta), as_fraction(tau)
    if not (nu1.exact and nu2.exact):
        raise ValueError("select_cover needs exact measures")
    if nu1.K != nu2.K:
        K = min(nu1.K, nu2.K)
        nu1, nu2 = nu1.coarsen(K), nu2.coarsen(K)
    if not (nu1.is_positive and nu2.is_positive):
        raise ValueError("select_cover needs positive measures")
    if nu1.is_zero:
        raise ValueError("nu1 is the zero measure")
    if len(np.intersect1d(nu1.cells, nu2.cells)):
        raise ValueError("nu1 and nu2 share grid cells (not mutually singular at this resolution)")
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    K = nu1.K
    n = nu1.size
    ref = c_beta_estimate(nu1, beta, K)
    per_scale = []
    for k in (range(K, -1, -1) if scales is None else scales):
        d = Fraction(1, 1 << k)
        delta = d if margin is None else as_fraction(margin(k) if callable(margin) else margin)
        cap = floor_pow2(beta * k)
        cells, nums = nu1.cell_masses(k)
        order = np.lexsort((cells, -nums)) if nums.dtype != object else \
            np.array(sorted(range(len(cells)), key=lambda i: (-nums[i], cells[i])), dtype=np.int64)
        covered = np.zeros(nu2.n_atoms, dtype=bool)
        budget = tau * nu2.den  # in nu2 numerator units
        used = 0
        chosen, mass1, skipped = [], 0, 0
        width = n >> k
        for i in order:
            if len(chosen) >= cap:
                break
            c = int(cells[i])
            lo = Fraction(c * width) - delta * n
            hi = Fraction((c + 1) * width) + delta * n
            idx = _wrapped_range(nu2.cells, -((-lo.numerator) // lo.denominator), hi.numerator // hi.denominator, n)
            new = idx[~covered[idx]]
            add = int(nu2.nums[new].sum()) if len(new) else 0
            if used + add < budget:
                used += add
                covered[new] = True
                chosen.append(c)
                mass1 += int(nums[i])
            else:
                skipped += 1
        mass1_f = Fraction(mass1, nu1.den)
        mass2_f = Fraction(used, nu2.den)
        conds = {
            "count_ok": len(chosen) <= cap,
            "count_strict_ok": (len(chosen) == 0) or (len(chosen) < 2 ** float(beta * k)),
            "mass_ok": mass1_f > ref / 2 - tau,
            "full_mass_ok": mass1_f > ref - tau,
            "margin_ok": mass2_f < tau,
        }
        if conds["count_ok"] and conds["mass_ok"] and conds["margin_ok"]:
            return CoverFamily(k, d, np.array(sorted(chosen), dtype=np.int64), delta, tau, beta,
                               mass1_f, mass2_f, ref, len(chosen) * 2.0 ** (-float(beta) * k), conds)
        binding = "mass" if not conds["mass_ok"] else "count"
        per_scale.append({"k": k, "binding": binding, "nu1_mass": mass1_f, "target": ref / 2 - tau,
                          "cap": cap, "skipped_for_margin": skipped})
    raise CoverError("no scale satisfies all cover conditions", per_scale)


# -- positive part ----------------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureSplit:
    """``positive_part`` lives on ``carrier``; ``remainder`` is ``|mu|`` off it.

    ``sign`` is -1 when the negative part dominated the c_beta family and the
    split was taken for ``-mu`` (norms of convolutions do not see the sign).
    """

    positive_part: DyadicMeasure
    remainder: DyadicMeasure
    carrier: np.ndarray
    eta: Fraction
    sign: int
    c_beta: Fraction


def isolate_positive_part(mu: DyadicMeasure, beta: Rational, eta: Rational) -> MeasureSplit:
    beta, eta = as_fraction(beta), as_fraction(eta)
    if eta <= 0:
        raise ValueError("eta must be positive")
    if not mu.exact:
        raise ValueError("isolate_positive_part needs an exact measure")
    c_hat = c_beta_estimate(mu, beta, mu.K)
    if c_hat == 0:
        raise ValueError("c_beta estimate is 0: nothing to isolate")
    fam, _ = c_beta_family(mu, beta, mu.K)
    in_fam = np.isin(mu.cells, fam)
    pos = int(mu.nums[in_fam & (mu.nums > 0)].sum())
    neg = -int(mu.nums[in_fam & (mu.nums < 0)].sum())
    sign = 1 if pos >= neg else -1
    smu = mu if sign == 1 else -mu
    carrier_mask = in_fam & (smu.nums > 0)
    carrier = smu.cells[carrier_mask]
    positive = smu.restrict_mask(carrier_mask)
    remainder = smu.restrict_mask(~carrier_mask).abs()
    split = MeasureSplit(positive, remainder, carrier, eta, sign, c_hat)
    assert positive.total_mass() > c_hat / 2 - eta
    return split
