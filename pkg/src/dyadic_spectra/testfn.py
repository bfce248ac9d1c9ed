"""The two-plateau test function h_n, exact convolutions with atomic measures,
the witness lower-bound pipeline and the band-limited polynomial built from h_n.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from . import _kernels
from ._exact import Rational, as_fraction, frac_phase
from .martingale import (
    CoverError,
    MountainRiverError,
    build_tree,
    c_beta_estimate,
    classify,
    isolate_positive_part,
    mountain_river_search,
    river_parameters,
    select_cover,
)
from .measure import DyadicMeasure, make_dirac

__all__ = [
    "TestFunctionHn",
    "StepFunction",
    "DerivativeAtoms",
    "ChainStep",
    "Prop2Report",
    "PipelineError",
    "BandEnergies",
    "BandPolynomial",
    "make_hn",
    "convolve_hn",
    "hn_fourier",
    "hn_derivative_measure",
    "witness_constant",
    "prop2_pipeline",
    "band_tail_energies",
    "band_projection_and_polynomial",
    "band_norm_experiment",
]

_ORIENTATIONS = ("direct", "reflected")


class TestFunctionHn:
    """Mean-zero step function of width ``2**-n`` with plateaus ``c1`` and ``-c2``.

    With ``a = 2**(-n-1)``, ``c1 = 2**(2n) (a - eps)`` and
    ``c2 = 2**(2n) (a + eps)``:

    * ``reflected``: ``c1`` on ``[-eps, a)`` and ``-c2`` on ``[a, 2a - eps)``;
      its distributional derivative is the three-atom measure with masses
      ``c1, -2**n, c2`` at ``-eps, a, 2a - eps``.
    * ``direct``: ``t -> reflected(-t)``, so that
      ``(h * mu)(t) = c1 mu([t - eps, t + a]) - c2 mu([t + a, t + 2a - eps])``.

    Blocks are half-open and positions are read modulo 1.
    """

    __test__ = False  # not a pytest class

    def __init__(self, n: int, epsilon: Rational, orientation: str = "direct"):
        n = int(n)
        eps = as_fraction(epsilon)
        if n < 0:
            raise ValueError("n must be non-negative")
        a = Fraction(1, 1 << (n + 1))
        if not 0 < eps < a:
            raise ValueError(f"epsilon must satisfy 0 < eps < 2**(-n-1) = {a}, got {eps}")
        if orientation not in _ORIENTATIONS:
            raise ValueError(f"orientation must be one of {_ORIENTATIONS}")
        self.n, self.epsilon, self.orientation, self.a = n, eps, orientation, a
        scale = 1 << (2 * n)
        self.c1 = scale * (a - eps)
        self.c2 = scale * (a + eps)
        if orientation == "reflected":
            self.blocks = ((-eps, a, self.c1), (a, 2 * a - eps, -self.c2))
        else:
            self.blocks = ((-2 * a + eps, -a, -self.c2), (-a, eps, self.c1))
        assert self.integral == 0
        assert self.l1 == Fraction(1, 2) - eps * eps * 2 ** (2 * n + 1)
        assert self.linf <= 2 ** n
        assert self.support_length == 2 * a

    # closed forms
    @property
    def integral(self) -> Fraction:
        return sum(((hi - lo) * v for lo, hi, v in self.blocks), Fraction(0))

    @property
    def l1(self) -> Fraction:
        return sum(((hi - lo) * abs(v) for lo, hi, v in self.blocks), Fraction(0))

    @property
    def l2_squared(self) -> Fraction:
        return sum(((hi - lo) * v * v for lo, hi, v in self.blocks), Fraction(0))

    @property
    def linf(self) -> Fraction:
        return max(abs(v) for _, _, v in self.blocks)

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        return self.blocks[0][0], self.blocks[-1][1]

    @property
    def support_length(self) -> Fraction:
        lo, hi = self.support
        return hi - lo

    @property
    def total_variation(self) -> Fraction:
        return sum((abs(j) for _, j in self.jumps), Fraction(0))

    @property
    def jumps(self) -> list[tuple[Fraction, Fraction]]:
        """Jump locations and sizes (the derivative measure), sorted by position."""
        (l0, h0, v0), (l1, h1, v1) = self.blocks
        return [(l0, v0), (h0, v1 - v0), (h1, -v1)]

    @property
    def scale(self) -> int:
        """Smallest ``D`` with every breakpoint in ``Z / D``."""
        return math.lcm(*(p.denominator for p, _ in self.jumps))

    def __call__(self, t: Rational) -> Fraction:
        t = as_fraction(t) % 1
        for lo, hi, v in self.blocks:
            if (t - lo) % 1 < hi - lo:
                return v
        return Fraction(0)

    def reflect(self) -> "TestFunctionHn":
        other = "reflected" if self.orientation == "direct" else "direct"
        return TestFunctionHn(self.n, self.epsilon, other)

    def __repr__(self) -> str:
        return f"TestFunctionHn(n={self.n}, epsilon={self.epsilon}, orientation={self.orientation!r})"


def make_hn(n: int, epsilon: Rational, orientation: str = "direct") -> TestFunctionHn:
    return TestFunctionHn(n, epsilon, orientation)


# -- step functions ------------------------------------------------------------------------

class StepFunction:
    """Right-continuous step function on the circle ``[0, 1)``.

    Breakpoints are integers over ``scale`` (sorted, distinct, in
    ``[0, scale)``); ``nums[i] / den`` is the value on
    ``[bp[i], bp[i+1])``, the last segment wrapping to ``bp[0] + scale``.
    With no breakpoints the function is the constant ``const / den``.
    """

    def __init__(self, scale: int, breakpoints, nums, den: int = 1, const: int = 0):
        self.scale = int(scale)
        self.bp = np.asarray(breakpoints, dtype=np.int64 if self.scale < 1 << 62 else object)
        self.nums = np.asarray(nums, dtype=object)
        self.den = int(den)
        self.const = int(const)
        if len(self.bp):
            lengths = np.diff(np.append(self.bp, self.bp[0] + self.scale)).astype(object)
            self._abs_cum = np.concatenate(([0], np.cumsum(np.abs(self.nums) * lengths))).astype(object)
        else:
            self._abs_cum = np.array([0, abs(self.const) * self.scale], dtype=object)

    @property
    def n_segments(self) -> int:
        return max(len(self.bp), 1)

    def segments(self):
        """Iterate ``(lo, hi, value)`` with Fraction endpoints."""
        if not len(self.bp):
            yield Fraction(0), Fraction(1), Fraction(self.const, self.den)
            return
        ends = np.append(self.bp[1:], self.bp[0] + self.scale)
        for lo, hi, v in zip(self.bp.tolist(), ends.tolist(), self.nums.tolist()):
            yield Fraction(lo, self.scale), Fraction(hi, self.scale), Fraction(v, self.den)

    def l1(self) -> Fraction:
        return Fraction(int(self._abs_cum[-1]), self.den * self.scale)

    def linf(self) -> Fraction:
        if not len(self.bp):
            return Fraction(abs(self.const), self.den)
        return Fraction(int(max(abs(v) for v in self.nums.tolist())), self.den)

    def integral(self) -> Fraction:
        if not len(self.bp):
            return Fraction(self.const, self.den)
        lengths = np.diff(np.append(self.bp, self.bp[0] + self.scale)).astype(object)
        return Fraction(int(np.sum(self.nums * lengths)), self.den * self.scale)

    def total_variation(self) -> Fraction:
        if not len(self.bp):
            return Fraction(0)
        d = self.nums - np.roll(self.nums, 1)
        return Fraction(int(np.sum(np.abs(d))), self.den)

    def _segment(self, x: int) -> int:
        """Index of the segment containing integer position ``x`` (``-1`` = wrap segment)."""
        return int(np.searchsorted(self.bp, x, side="right")) - 1

    def __call__(self, t: Rational) -> Fraction:
        t = as_fraction(t) % 1
        if not len(self.bp):
            return Fraction(self.const, self.den)
        i = self._segment(math.floor(t * self.scale))
        return Fraction(int(self.nums[i]), self.den)

    def sample(self, points) -> np.ndarray:
        """Float values at float points in ``[0, 1)`` (plotting and quadrature)."""
        pts = np.mod(np.asarray(points, dtype=np.float64), 1.0) * self.scale
        if not len(self.bp):
            return np.full(pts.shape, self.const / self.den)
        idx = np.searchsorted(self.bp.astype(np.float64), pts, side="right") - 1
        vals = np.array([float(Fraction(int(v), self.den)) for v in self.nums.tolist()])
        return vals[idx]

    def _abs_antiderivative(self, x: Fraction) -> Fraction:
        """``int_0^x |f|`` for ``0 <= x <= 1``."""
        if not len(self.bp):
            return abs(Fraction(self.const, self.den)) * x
        X = x * self.scale
        i = self._segment(math.floor(X)) if X < self.scale else len(self.bp) - 1
        if X >= self.scale:
            return self.l1()
        if i < 0:  # before the first breakpoint: tail of the wrap segment
            return abs(Fraction(int(self.nums[-1]), self.den)) * x
        head = abs(Fraction(int(self.nums[-1]), self.den)) * Fraction(int(self.bp[0]), self.scale)
        body = Fraction(int(self._abs_cum[i]), self.den * self.scale)
        part = abs(Fraction(int(self.nums[i]), self.den)) * (X - int(self.bp[i])) / self.scale
        return head + body + part

    def integrate_abs(self, lo: Rational, hi: Rational) -> Fraction:
        """Exact ``int_lo^hi |f|`` on the circle (``lo <= hi``)."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        if hi < lo:
            raise ValueError("need lo <= hi")
        length = hi - lo
        turns = math.floor(length)
        rest = length - turns
        lo = lo % 1
        end = lo + rest
        if end <= 1:
            part = self._abs_antiderivative(end) - self._abs_antiderivative(lo)
        else:
            part = self.l1() - self._abs_antiderivative(lo) + self._abs_antiderivative(end - 1)
        return turns * self.l1() + part

    def _full_abs(self) -> Fraction:
        return self.l1()


def convolve_hn(h: TestFunctionHn, mu: DyadicMeasure) -> StepFunction:
    """Exact ``(h * mu)(t) = sum_j w_j h(t - x_j)`` as a step function."""
    if not mu.exact:
        raise ValueError("convolve_hn needs an exact measure")
    D = math.lcm(mu.size, h.scale)
    jd = math.lcm(*(j.denominator for _, j in h.jumps), *(v.denominator for _, _, v in h.blocks))
    den = mu.den * jd
    if mu.is_zero:
        return StepFunction(D, [], [], den)
    idt = np.int64 if D < 1 << 61 else object
    pos = (mu.cells.astype(object) * (D // mu.size)).astype(idt)
    w = mu.nums.astype(object)
    ev_pos, ev_val = [], []
    for p, j in h.jumps:
        ev_pos.append((pos + int(p * D)) % D)
        ev_val.append(w * int(j * jd))
    ev_pos = np.concatenate(ev_pos)
    ev_val = np.concatenate(ev_val)
    order = np.argsort(ev_pos, kind="stable")
    ev_pos, ev_val = ev_pos[order], ev_val[order]
    starts = np.concatenate(([0], np.flatnonzero(np.diff(ev_pos)) + 1))
    bps = ev_pos[starts]
    jumps = np.add.reduceat(ev_val, starts).astype(object)
    assert sum(jumps.tolist()) == 0
    # value on the wrap segment [bps[-1], D): evaluate directly
    start = _direct_value(h, pos, w, int(bps[-1]), D, jd)
    nums = (start + np.cumsum(jumps)).astype(object)
    keep = jumps != 0
    if not keep.any():
        return StepFunction(D, [], [], den, const=int(start))
    return StepFunction(D, bps[keep], nums[keep], den)


def _direct_value(h: TestFunctionHn, pos, w, t: int, D: int, jd: int) -> int:
    """Numerator (over ``den * jd``) of ``sum_j w_j h((t - pos_j) / D)``."""
    s = (t - pos) % D
    total = 0
    for lo, hi, v in h.blocks:
        lo_i = int(lo * D) % D
        length = int((hi - lo) * D)
        inside = ((s - lo_i) % D) < length
        if inside.any():
            total += int(v * jd) * int(np.sum(w[inside]))
    return total


# -- Fourier side ---------------------------------------------------------------------------

def _phase_terms(j: np.ndarray, x: Fraction) -> np.ndarray:
    """``exp(-2 pi i j x)`` with the product ``j x`` reduced exactly mod 1."""
    ph = frac_phase(j, x.numerator % x.denominator, x.denominator)
    return np.exp(-2j * np.pi * ph)


def hn_fourier(h: TestFunctionHn, j):
    """``h^(j) = sum_blocks v (e(-j lo) - e(-j hi)) / (2 pi i j)``; ``h^(0) = 0``."""
    scalar = np.isscalar(j)
    jj = np.atleast_1d(np.asarray(j, dtype=np.int64))
    out = np.zeros(jj.shape, dtype=np.complex128)
    nz = jj != 0
    if nz.any():
        jn = jj[nz]
        acc = np.zeros(jn.shape, dtype=np.complex128)
        for lo, hi, v in h.blocks:
            acc += float(v) * (_phase_terms(jn, lo) - _phase_terms(jn, hi))
        out[nz] = acc / (2j * np.pi * jn)
    return complex(out[0]) if scalar else out


@dataclass(frozen=True)
class DerivativeAtoms:
    """Finite signed atomic measure with rational positions (mod 1) and weights."""

    positions: tuple
    weights: tuple

    def total(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    def total_variation(self) -> Fraction:
        return sum((abs(w) for w in self.weights), Fraction(0))

    def fourier(self, j):
        scalar = np.isscalar(j)
        jj = np.atleast_1d(np.asarray(j, dtype=np.int64))
        acc = np.zeros(jj.shape, dtype=np.complex128)
        for x, w in zip(self.positions, self.weights):
            acc += float(w) * _phase_terms(jj, x)
        return complex(acc[0]) if scalar else acc

    def as_measure(self, K: int) -> DyadicMeasure:
        """Grid version on ``2**-K`` (positions must be on the grid)."""
        from .measure import make_atoms

        size = 1 << K
        table = {}
        for x, w in zip(self.positions, self.weights):
            c = x * size
            if c.denominator != 1:
                raise ValueError(f"atom at {x} is not on the 2**-{K} grid")
            table[int(c) % size] = table.get(int(c) % size, 0) + w
        return make_atoms(K, table)


def hn_derivative_measure(h: TestFunctionHn) -> DerivativeAtoms:
    pos, wts = zip(*h.jumps)
    return DerivativeAtoms(tuple(p % 1 for p in pos), tuple(wts))


# -- witness pipeline ------------------------------------------------------------------------

class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str, detail=None):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.detail = detail


@dataclass(frozen=True)
class ChainStep:
    name: str
    lhs: object
    rhs: object
    holds: bool
    asserted: bool = True
    note: str = ""


def _mp(x) -> mpmath.mpf:
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def witness_constant(alpha: Rational, rho: Rational) -> mpmath.mpf:
    """``2**-6 (2**(alpha+1) - 1)**2 ((1 - rho)/4)**2 / 2``; the bound is this times ``c_beta``."""
    alpha, rho = as_fraction(alpha), as_fraction(rho)
    with mpmath.workdps(60):
        s = mpmath.power(2, _mp(alpha + 1)) - 1
        return mpmath.ldexp(s * s * _mp(((1 - rho) / 4) ** 2), -7)


@dataclass
class Prop2Report:
    beta: Fraction
    alpha: Fraction
    rho: Fraction
    eta: Fraction
    c_beta: Fraction
    bound: float
    vacuous: bool = False
    sign: int = 1
    k: int | None = None
    r: int | None = None
    cover: dict | None = None
    n: int | None = None
    epsilon: Fraction | None = None
    orientation: str | None = None
    vertices: list = field(default_factory=list)
    E: list = field(default_factory=list)
    achieved: Fraction | None = None
    premise: ChainStep | None = None
    chain: list = field(default_factory=list)
    scale_failures: list = field(default_factory=list)
    constants: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        if self.vacuous:
            return True
        return all(s.holds for s in self.chain if s.asserted)

    @property
    def effective_bound(self) -> float:
        return 0.0 if self.vacuous else self.bound

    def failed_steps(self) -> list[str]:
        return [s.name for s in self.chain if s.asserted and not s.holds]


def _interval_mass(mu: DyadicMeasure, lo: Fraction, hi: Fraction) -> Fraction:
    """``|mu|``-free mass of the closed arc ``[lo, hi]`` (length < 1)."""
    n = mu.size
    a = math.ceil(lo * n)
    b = math.floor(hi * n)
    if b < a:
        return Fraction(0)
    cells = mu.cells
    if b - a + 1 >= n:
        sel = np.ones(len(cells), dtype=bool)
    else:
        am, bm = a % n, b % n
        sel = (cells >= am) & (cells <= bm) if am <= bm else (cells >= am) | (cells <= bm)
    return Fraction(int(mu.nums[sel].sum()) if sel.any() else 0, mu.den)


def _union_mass(mu: DyadicMeasure, arcs) -> Fraction:
    """Mass of a union of closed arcs given as ``(lo, hi)`` Fractions."""
    n = mu.size
    covered = np.zeros(mu.n_atoms, dtype=bool)
    for lo, hi in arcs:
        a, b = math.ceil(lo * n), math.floor(hi * n)
        if b < a:
            continue
        if b - a + 1 >= n:
            covered[:] = True
            break
        am, bm = a % n, b % n
        covered |= ((mu.cells >= am) & (mu.cells <= bm)) if am <= bm else ((mu.cells >= am) | (mu.cells <= bm))
    return Fraction(int(mu.nums[covered].sum()) if covered.any() else 0, mu.den)


def _choose_epsilon(alpha: Fraction, rho: Fraction, n: int) -> Fraction:
    bits = n + 36
    with mpmath.workdps(60):
        s = mpmath.power(2, _mp(alpha + 1)) - 1
        target = s * _mp(1 - rho) / 4 * mpmath.ldexp(1, -n - 3)
        return Fraction(int(mpmath.floor(mpmath.ldexp(target, bits))), 1 << bits)


def prop2_pipeline(mu: DyadicMeasure, beta: Rational, alpha: Rational, rho: Rational,
                   eta: Rational, scales: Sequence[int] | None = None) -> Prop2Report:
    """Build a witness ``h_n`` for ``mu`` and check the lower-bound chain.

    Stages: positive-part isolation, equal-length cover ``D_k``, Mountain
    River level ``n`` for ``mu_k = mu_p | D_k``, orientation choice, then the
    exact convolution and the per-step ledger.
    """
    beta, alpha, rho, eta = (as_fraction(v) for v in (beta, alpha, rho, eta))
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    if not -1 < alpha < 0:
        raise ValueError("alpha must lie in (-1, 0)")
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if alpha * rho + beta >= 0:
        raise ValueError("need alpha*rho + beta < 0")
    if eta <= 0:
        raise ValueError("eta must be positive")
    try:
        split = isolate_positive_part(mu, beta, eta)
    except ValueError as exc:
        raise PipelineError("isolate_positive_part", str(exc)) from exc
    c_hat = split.c_beta
    const = witness_constant(alpha, rho)
    report = Prop2Report(beta, alpha, rho, eta, c_hat, float(const * _mp(c_hat)), sign=split.sign)
    report.constants = {
        "witness_constant": float(const),
        "complex_case": "bound / (1 + C1), C1 the conjugation norm on Re H^1",
        "hardy_norm": "||h_n||_{H^1} <= A (universal atom constant, not computed)",
    }
    if c_hat / 2 <= eta:
        report.vacuous = True
        return report
    smu = mu if split.sign == 1 else -mu
    K = mu.K
    found = None
    for k in (range(K, 1, -1) if scales is None else scales):
        try:
            _, r = river_parameters(beta, alpha, rho, k)
            cover = select_cover(split.positive_part, split.remainder, beta, eta, scales=[k],
                                 margin=Fraction(2, 1 << r) if r < 64 else Fraction(0))
        except CoverError as exc:
            report.scale_failures.append({"k": k, "stage": "select_cover", "detail": exc.per_scale})
            continue
        mu_k = split.positive_part.restrict(cover.cells, level=k)
        try:
            river = mountain_river_search(mu_k, beta, alpha, rho, k)
        except MountainRiverError as exc:
            report.scale_failures.append({"k": k, "stage": "mountain_river_search",
                                          "detail": {n: v for n, v in exc.turbulent_mass_by_level.items()}})
            continue
        except ValueError as exc:
            report.scale_failures.append({"k": k, "stage": "mountain_river_search", "detail": str(exc)})
            continue
        found = (k, cover, mu_k, river)
        break
    if found is None:
        raise PipelineError("mountain_river_search", "no scale yields a cover and a calm level",
                            report.scale_failures)
    k, cover, mu_k, river = found
    n = river.n
    report.k, report.r, report.cover, report.n = k, river.r, cover.to_dict(), n
    tree_k = build_tree(mu_k)
    cls = classify(tree_k, n, alpha)
    _, _, m0_all, m1_all = tree_k.children(n)
    cells_n = tree_k.level(n)[0]

    def pick(vertices, big_is_left: bool):
        idx = np.searchsorted(cells_n, vertices)
        m0 = [Fraction(int(v), mu_k.den) for v in m0_all[idx].tolist()]
        m1 = [Fraction(int(v), mu_k.den) for v in m1_all[idx].tolist()]
        return (m0, m1) if big_is_left else (m1, m0)

    big_a, small_a = pick(cls.descent, True)
    big_b, small_b = pick(cls.ascent, False)
    gap_a = sum(big_a, Fraction(0)) - sum(small_a, Fraction(0))
    gap_b = sum(big_b, Fraction(0)) - sum(small_b, Fraction(0))
    if gap_a >= gap_b:
        orientation, verts, big, small, gap = "direct", cls.descent, big_a, small_a, gap_a
    else:
        orientation, verts, big, small, gap = "reflected", cls.ascent, big_b, small_b, gap_b
    eps = _choose_epsilon(alpha, rho, n)
    h = TestFunctionHn(n, eps, orientation)
    report.epsilon, report.orientation = eps, orientation
    report.vertices = [int(v) for v in verts]
    width = Fraction(1, 1 << n)
    if orientation == "direct":
        E = [(Fraction(int(v)) * width, Fraction(int(v)) * width + eps) for v in verts]
    else:
        E = [(Fraction(int(v) + 1) * width - eps, Fraction(int(v) + 1) * width) for v in verts]
    report.E = E

    f_mu = convolve_hn(h, smu)
    f_k = convolve_hn(h, mu_k)
    achieved = f_mu.l1()
    report.achieved = achieved
    I_mu = sum((f_mu.integrate_abs(lo, hi) for lo, hi in E), Fraction(0))
    I_k = sum((f_k.integrate_abs(lo, hi) for lo, hi in E), Fraction(0))
    e = eps * 2 ** n
    norm_k = mu_k.total_mass()
    with mpmath.workdps(60):
        s = mpmath.power(2, _mp(alpha + 1)) - 1
        P = s * _mp(c_hat) / 2 * _mp(1 - rho) / 2
        premise = ChainStep("premise", gap, float(P), _mp(gap) > P, note=f"orientation {orientation}")
        report.premise = premise
        chain = [ChainStep("s1_restrict_to_E", achieved, I_mu, achieved >= I_mu)]
        margin_arcs = [(lo - eps, hi) for lo, hi in E] if orientation == "direct" else [(lo, hi + eps) for lo, hi in E]
        r_term = 2 ** n * eps * _union_mass(split.remainder, margin_arcs) if not split.remainder.is_zero else Fraction(0)
        chain.append(ChainStep(
            "s2_pass_to_mu_k", I_mu, {"plus_reading": I_k + r_term, "minus_reading": I_k - r_term, "I_mu_k": I_k},
            I_mu >= I_k - r_term, asserted=False,
            note=f"plus reading holds: {I_mu >= I_k + r_term}; minus reading holds: {I_mu >= I_k - r_term}"))
        s3_rhs = eps * sum((max(Fraction(0), h.c1 * b - h.c2 * sm) for b, sm in zip(big, small)), Fraction(0))
        chain.append(ChainStep("s3_plateau_lower_bound", I_k, s3_rhs, I_k >= s3_rhs))
        sb, ss = sum(big, Fraction(0)), sum(small, Fraction(0))
        s4_rhs = 2 ** n * eps * max(Fraction(0), (Fraction(1, 2) - e) * sb - (Fraction(1, 2) + e) * ss)
        chain.append(ChainStep("s4_sum_inside", s3_rhs, s4_rhs, s3_rhs >= s4_rhs))
        s5_rhs = _mp(2 ** n * eps) * mpmath.mpf(max(0, P / 2 - _mp(e * norm_k)))
        chain.append(ChainStep("s5_premise_and_mass", s4_rhs, float(s5_rhs),
                               bool(premise.holds and _mp(s4_rhs) >= s5_rhs),
                               note="uses the premise and sum(m0 + m1) <= ||mu_k|| <= c_beta"))
        bound = const * _mp(c_hat)
        chain.append(ChainStep("s6_epsilon_choice", float(s5_rhs), float(bound), bool(s5_rhs >= bound)))
        chain.append(ChainStep("final", achieved, float(bound), bool(_mp(achieved) >= bound)))
        chain.append(ChainStep("young", achieved, h.l1 * mu.total_variation(),
                               achieved <= h.l1 * mu.total_variation()))
    report.chain = chain
    return report


# -- band energies -----------------------------------------------------------------------------

def _jump_energy(h: TestFunctionHn, j0: int, j1: int) -> float:
    """``sum_{j0 <= j <= j1} |h^(j)|**2`` via the derivative atoms."""
    if j1 < j0:
        return 0.0
    q = h.scale
    pos = np.array([int((p % 1) * q) for p, _ in h.jumps], dtype=np.int64)
    coef = np.array([float(w) for _, w in h.jumps], dtype=np.float64)
    if q < 1 << 31:
        return _kernels.jump_energy(j0, j1, q, pos, coef)
    total, step = 0.0, 1 << 16
    for start in range(j0, j1 + 1, step):
        j = np.arange(start, min(j1, start + step - 1) + 1, dtype=np.int64)
        acc = np.zeros(len(j), dtype=np.complex128)
        for p, c in zip(pos.tolist(), coef.tolist()):
            acc += c * np.exp(-2j * np.pi * frac_phase(j, p, q))
        total += float(np.sum(np.abs(acc) ** 2 / (4 * np.pi ** 2 * j.astype(np.float64) ** 2)))
    return total


def _low_cut(a: Fraction, n: int) -> int:
    """Largest ``j >= 0`` with ``j < a 2**(2n/3)`` (``j**3 < a**3 2**(2n)``)."""
    target = a ** 3 * 2 ** (2 * n)
    j = int(float(a) * 2 ** (2 * n / 3)) + 2
    while j > 0 and j ** 3 >= target:
        j -= 1
    return j


def _band_edges(a: Fraction, b: Fraction, n: int) -> tuple[int, int]:
    """Smallest and largest integer ``j`` with ``a 2**(2n/3) <= j <= b 2**(2n)``."""
    lo = _low_cut(a, n) + 1
    return lo, math.floor(b * 2 ** (2 * n))


@dataclass(frozen=True)
class BandEnergies:
    n: int
    a: Fraction
    b: Fraction
    low: float
    high_sum: float
    high_upper: float
    majorant: float
    low_cut: int  # low band is 1 <= |j| <= low_cut
    high_start: int
    high_stop: int

    @property
    def low_bound(self) -> float:
        return 8 * math.pi ** 2 * float(self.a) ** 3

    @property
    def high_bound(self) -> float:
        return 18 / float(self.b)

    @property
    def high_interval(self) -> tuple[float, float]:
        return self.high_sum, self.high_upper


def band_tail_energies(h: TestFunctionHn, a: Rational, b: Rational, terms: int = 1 << 20) -> BandEnergies:
    """Energy of ``h^`` below ``a 2**(2n/3)`` and (certified) above ``b 2**(2n)``.

    The high part sums ``terms`` frequencies past the edge and adds the
    closed-form majorant ``9 * 2**(2n) / (2 pi**2 J_max)`` for the rest.
    """
    a, b = as_fraction(a), as_fraction(b)
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    n = h.n
    cut = _low_cut(a, n)
    low = 2 * _jump_energy(h, 1, cut)
    j0 = math.floor(b * 2 ** (2 * n)) + 1
    j_max = j0 + terms - 1
    high = 2 * _jump_energy(h, j0, j_max)
    majorant = 9 * 2 ** (2 * n) / (2 * math.pi ** 2 * j_max)
    return BandEnergies(n, a, b, low, high, high + majorant, majorant, cut, j0, j_max)


class BandPolynomial:
    """Coefficients of ``phi_n`` (out-of-band part of ``h_n``) and of
    ``p_n = (h_n - phi_n) + i (conj h_n - conj phi_n)``, evaluated lazily.

    ``phi_table`` materialises the out-of-band coefficients up to ``N_max``.
    """

    def __init__(self, h: TestFunctionHn, a: Rational, b: Rational, N_max: int):
        self.h, self.a, self.b = h, as_fraction(a), as_fraction(b)
        self.lo, self.hi = _band_edges(self.a, self.b, h.n)
        if N_max < self.hi:
            raise ValueError(f"truncation too small: N_max={N_max} < b 2**(2n) = {float(self.b * 2 ** (2 * h.n))}")
        self.N_max = int(N_max)

    def in_band(self, j) -> np.ndarray:
        aj = np.abs(np.asarray(j, dtype=np.int64))
        return (aj >= self.lo) & (aj <= self.hi)

    def h_coeff(self, j) -> np.ndarray:
        return hn_fourier(self.h, np.asarray(j, dtype=np.int64))

    def phi_coeff(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=np.int64)
        return np.where(self.in_band(j), 0, self.h_coeff(j))

    def p_coeff(self, j) -> np.ndarray:
        from .fourier import conjugate_multiplier

        j = np.asarray(j, dtype=np.int64)
        g = self.h_coeff(j) - self.phi_coeff(j)
        return g + 1j * conjugate_multiplier(j, g)

    def phi_table(self, limit: int | None = None):
        """``(j, phi^(j))`` for out-of-band ``|j| <= min(N_max, limit)``."""
        top = self.N_max if limit is None else min(limit, self.N_max)
        if 2 * top + 1 > 1 << 24:
            raise ValueError("phi table too large to materialise; use phi_coeff")
        j = np.arange(-top, top + 1, dtype=np.int64)
        keep = ~self.in_band(j)
        return j[keep], self.h_coeff(j[keep])

    def phi_norm_sq(self) -> float:
        """``||phi_n||_2**2`` truncated at ``N_max`` (low band plus the part above the band)."""
        return 2 * (_jump_energy(self.h, 1, self.lo - 1) + _jump_energy(self.h, self.hi + 1, self.N_max))

    def support_check(self, samples: int = 4096, window: int = 4096, seed: int = 0) -> dict:
        rng = np.random.default_rng(seed)
        w = min(window, self.N_max)
        edges = np.concatenate([np.arange(e - 3, e + 4) for e in (self.lo, self.hi, -self.lo, -self.hi)])
        rand = rng.integers(-self.N_max, self.N_max + 1, size=samples)
        j = np.unique(np.concatenate([np.arange(-w, w + 1), edges, rand, -np.abs(rand)]))
        p = self.p_coeff(j)
        nz = np.abs(p) > 0
        inside = self.in_band(j) & (j > 0)
        doubled = np.allclose(p[inside], 2 * self.h_coeff(j[inside]), rtol=1e-12, atol=0)
        supp = j[nz]
        return {
            "sampled": int(len(j)),
            "negative_nonzero": int(np.count_nonzero(nz & (j < 0))),
            "outside_band_nonzero": int(np.count_nonzero(nz & ~inside)),
            "doubled_in_band": bool(doubled),
            "support_min": int(supp.min()) if len(supp) else None,
            "support_max": int(supp.max()) if len(supp) else None,
            "band": (self.lo, self.hi),
            "ok": bool(doubled and not np.any(nz & ~inside)),
        }


def band_projection_and_polynomial(h: TestFunctionHn, a: Rational, b: Rational, N_max: int,
                                   seed: int = 0) -> tuple[BandPolynomial, dict]:
    poly = BandPolynomial(h, a, b, N_max)
    check = poly.support_check(seed=seed)
    return poly, check


def band_norm_experiment(mu: DyadicMeasure, beta: Rational, alpha: Rational, rho: Rational,
                         a: Rational, b: Rational, eta: Rational = Fraction(1, 100),
                         n: int | None = None, epsilon: Rational | None = None,
                         max_degree: int = 1 << 16) -> dict:
    """Quadrature estimate of ``||mu * p_n||_1 / ||p_n||_1`` with the
    measured conjugation ratios ``C1``, ``C2``.

    ``n`` and ``epsilon`` default to the witness pipeline's choice.
    """
    a, b, eta = as_fraction(a), as_fraction(b), as_fraction(eta)
    pipeline = None
    sign = 1
    orientation = "direct"
    if n is None:
        pipeline = prop2_pipeline(mu, beta, alpha, rho, eta)
        if pipeline.vacuous:
            raise PipelineError("prop2_pipeline", "vacuous witness bound; nothing to test")
        n, epsilon, orientation, sign = pipeline.n, pipeline.epsilon, pipeline.orientation, pipeline.sign
    epsilon = Fraction(1, 1 << (n + 3)) if epsilon is None else as_fraction(epsilon)
    h = TestFunctionHn(n, epsilon, orientation)
    smu = mu if sign == 1 else -mu
    N = math.floor(b * 2 ** (2 * n))
    if N > max_degree:
        raise ValueError(f"band top b 2**(2n) = {N} exceeds the quadrature limit {max_degree}")
    poly = BandPolynomial(h, a, b, N)
    from .fourier import fourier_stieltjes

    def quad(M: int):
        j = np.fft.fftfreq(M, d=1.0 / M).astype(np.int64)
        pc = poly.p_coeff(j)
        mc = fourier_stieltjes(smu, j).values
        p_vals = np.fft.ifft(pc) * M
        mp_vals = np.fft.ifft(mc * pc) * M
        hc = np.where(np.abs(j) < M // 2, poly.h_coeff(j), 0)
        ht = np.fft.ifft(-1j * np.sign(j) * hc) * M
        return np.mean(np.abs(p_vals)), np.mean(np.abs(mp_vals)), np.mean(np.abs(ht))

    M = 1 << max(3, math.ceil(math.log2(8 * max(N, 1))))
    p1, mp1, ht1 = quad(M)
    p2, mp2, _ = quad(2 * M)
    quad_err = max(abs(p1 - p2), abs(mp1 - mp2))
    hmu = convolve_hn(h, smu).l1()
    band_energy = 2 * _jump_energy(h, poly.lo, poly.hi)
    phi_l2 = math.sqrt(max(0.0, float(h.l2_squared) - band_energy))
    tv = float(mu.total_variation())
    c1 = ht1 / float(h.l1)
    c2 = 1.0  # conjugation is an isometry on mean-zero L^2 and phi^(0) = 0
    triangle_rhs = float(hmu) - tv * phi_l2
    out = {
        "n": n,
        "epsilon": epsilon,
        "orientation": orientation,
        "band": (poly.lo, poly.hi),
        "grid_points": M,
        "p_l1": p1,
        "mu_p_l1": mp1,
        "ratio": mp1 / p1 if p1 > 0 else float("nan"),
        "quadrature_error": quad_err,
        "h_mu_l1": hmu,
        "phi_l2": phi_l2,
        "C1_empirical": c1,
        "C2_empirical": c2,
        "triangle_rhs": triangle_rhs,
        "triangle_holds": bool(mp1 + quad_err + 1e-12 >= triangle_rhs),
        "warning_band_too_narrow": bool(18 / float(b) + 8 * math.pi ** 2 * float(a) ** 3 >= float(eta) ** 2),
    }
    if pipeline is not None:
        cb = pipeline.bound
        out["reference"] = (cb - float(eta)) / (1 + c1 + (1 + c2) * float(eta))
        out["witness_bound"] = cb
    return out
