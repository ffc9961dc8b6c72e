"""Exact univariate polynomials: Chebyshev, discrete Chebyshev, threshold PTFs.

Coefficients are Fractions throughout and construction never rounds; the
band guarantees of the threshold polynomials are decidable exactly at any
rational point.  The only floating point lives in eval_float_guarded,
which carries a running error bound so callers know when a double-precision
value can be trusted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial


def as_fraction(x) -> Fraction:
    """Coerce to an exact rational.

    Floats are interpreted through their shortest decimal repr (0.1 means
    1/10), which keeps CLI inputs and literals unsurprising.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


class InvalidDegreeError(ValueError):
    """Discrete Chebyshev D_{q,t} requires q <= t."""


class InvalidAmplificationError(ValueError):
    """Threshold PTFs require amplification s >= 2."""


@dataclass(frozen=True)
class UnivariatePoly:
    """Polynomial in the monomial basis; coeffs[j] multiplies x^j.

    Invariant: no trailing zero coefficient (the zero polynomial stores an
    empty tuple and reports degree -1).
    """

    coeffs: tuple[Fraction, ...]

    @staticmethod
    def from_coeffs(coeffs) -> "UnivariatePoly":
        cs = [as_fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        return UnivariatePoly(tuple(cs))

    @classmethod
    def zero(cls) -> "UnivariatePoly":
        return cls(())

    @classmethod
    def constant(cls, c) -> "UnivariatePoly":
        return cls.from_coeffs([c])

    @classmethod
    def x(cls) -> "UnivariatePoly":
        return cls.from_coeffs([0, 1])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __add__(self, other: "UnivariatePoly") -> "UnivariatePoly":
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, c in enumerate(b):
            out[i] += c
        return UnivariatePoly.from_coeffs(out)

    def __sub__(self, other: "UnivariatePoly") -> "UnivariatePoly":
        return self + other.scale(-1)

    def __mul__(self, other: "UnivariatePoly") -> "UnivariatePoly":
        if not self.coeffs or not other.coeffs:
            return UnivariatePoly.zero()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                if b != 0:
                    out[i + j] += a * b
        return UnivariatePoly.from_coeffs(out)

    def scale(self, c) -> "UnivariatePoly":
        c = as_fraction(c)
        if c == 0:
            return UnivariatePoly.zero()
        return UnivariatePoly(tuple(a * c for a in self.coeffs))

    def compose_affine(self, a, b) -> "UnivariatePoly":
        """Exact composition P(a*x + b) via Horner in the polynomial ring.

        Integer a, b run over a denominator-cleared integer Horner (one
        final division), which matters at Chebyshev-scale degrees.
        """
        a, b = as_fraction(a), as_fraction(b)
        if a.denominator == 1 and b.denominator == 1 and self.coeffs:
            from math import lcm

            den = lcm(*(c.denominator for c in self.coeffs))
            nums = [int(c * den) for c in self.coeffs]
            ai, bi = int(a), int(b)
            acc = [0]
            for c in reversed(nums):
                new = [0] * (len(acc) + 1)
                for i, v in enumerate(acc):
                    if v:
                        new[i] += v * bi
                        new[i + 1] += v * ai
                new[0] += c
                acc = new
            inv = Fraction(1, den)
            return UnivariatePoly.from_coeffs([v * inv for v in acc])
        lin = UnivariatePoly.from_coeffs([b, a])
        acc_p = UnivariatePoly.zero()
        for c in reversed(self.coeffs):
            acc_p = acc_p * lin + UnivariatePoly.constant(c)
        return acc_p

    def eval(self, x) -> Fraction:
        x = as_fraction(x)
        acc = Fraction(0)
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    __call__ = eval


def eval_exact(p: UnivariatePoly, x) -> Fraction:
    """Horner evaluation with exact rationals."""
    return p.eval(x)


def eval_float_guarded(p: UnivariatePoly, x: float) -> tuple[float, bool]:
    """Horner in double precision plus a running error bound.

    Returns (value, trusted).  trusted is False when the error bound
    exceeds 1/4, a quarter of the unit band gap separating |P| <= 1 from
    P > 1 in every threshold construction here; callers should then fall
    back to eval_exact.
    """
    if not p.coeffs:
        return 0.0, True
    u = 2.0 ** -53
    ax = abs(x)
    val = 0.0
    mag = 0.0  # running evaluation of sum |c_j| |x|^j
    try:
        for c in reversed(p.coeffs):
            cf = float(c)
            val = val * x + cf
            mag = mag * ax + abs(cf)
    except OverflowError:
        return math.inf, False
    if math.isinf(val) or math.isnan(val) or math.isinf(mag):
        return val, False
    n = len(p.coeffs) - 1
    gamma = (2 * n * u) / (1 - 2 * n * u) if n else 0.0
    bound = gamma * mag
    return val, bound <= 0.25


# ---------------------------------------------------------------------------
# binomial (falling-factorial) basis


@lru_cache(maxsize=None)
def _stirling2_row(n: int) -> tuple[int, ...]:
    """Stirling numbers of the second kind S(n, 0..n)."""
    if n == 0:
        return (1,)
    prev = _stirling2_row(n - 1)
    row = [0] * (n + 1)
    for j in range(1, n + 1):
        row[j] = j * (prev[j] if j < n else 0) + prev[j - 1]
    return tuple(row)


@lru_cache(maxsize=None)
def _binomial_poly(i: int) -> UnivariatePoly:
    """C(x, i) = x(x-1)...(x-i+1)/i! as an exact polynomial."""
    p = UnivariatePoly.constant(1)
    for ell in range(i):
        p = p * UnivariatePoly.from_coeffs([-ell, 1])
    return p.scale(Fraction(1, factorial(i)))


@dataclass(frozen=True)
class BinomialBasisPoly:
    """Polynomial in the basis C(y, j); coeffs[j] multiplies C(y, j).

    On Boolean inputs with y = sum(x), C(y, j) equals the elementary
    symmetric polynomial e_j(x), which is the bridge to multilinear
    expansion.
    """

    coeffs: tuple[Fraction, ...]

    @staticmethod
    def from_coeffs(coeffs) -> "BinomialBasisPoly":
        cs = [as_fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        return BinomialBasisPoly(tuple(cs))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def eval(self, y) -> Fraction:
        y = as_fraction(y)
        acc = Fraction(0)
        binom = Fraction(1)  # C(y, j), updated incrementally
        for j, c in enumerate(self.coeffs):
            if j > 0:
                binom = binom * (y - (j - 1)) / j
            acc += c * binom
        return acc

    __call__ = eval


def to_binomial_basis(p: UnivariatePoly) -> BinomialBasisPoly:
    """Exact change of basis x^n -> sum_j S(n,j) j! C(x,j)."""
    if not p.coeffs:
        return BinomialBasisPoly(())
    out = [Fraction(0)] * len(p.coeffs)
    for n, a in enumerate(p.coeffs):
        if a == 0:
            continue
        row = _stirling2_row(n)
        for j, s in enumerate(row):
            if s:
                out[j] += a * s * factorial(j)
    return BinomialBasisPoly.from_coeffs(out)


def from_binomial_basis(b: BinomialBasisPoly) -> UnivariatePoly:
    acc = UnivariatePoly.zero()
    for j, c in enumerate(b.coeffs):
        if c != 0:
            acc = acc + _binomial_poly(j).scale(c)
    return acc


# ---------------------------------------------------------------------------
# Chebyshev families


def chebyshev(q: int) -> UnivariatePoly:
    """Degree-q Chebyshev polynomial of the first kind, exact integers."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    t_prev = UnivariatePoly.constant(1)
    if q == 0:
        return t_prev
    t_cur = UnivariatePoly.x()
    two_x = UnivariatePoly.from_coeffs([0, 2])
    for _ in range(q - 1):
        t_prev, t_cur = t_cur, two_x * t_cur - t_prev
    return t_cur


def _int_poly_mul(a: list[int], b: list[int]) -> list[int]:
    out = [0] * (len(a) + len(b) - 1)
    for i, av in enumerate(a):
        if av:
            for j, bv in enumerate(b):
                if bv:
                    out[i + j] += av * bv
    return out


@lru_cache(maxsize=None)
def discrete_chebyshev(q: int, t: int) -> UnivariatePoly:
    """D_{q,t}(x) = sum_i (-1)^i C(q,i) C(t-x, q-i) C(x, i), degree exactly q.

    Computed as the integer polynomial q! D_{q,t} (each term is
    (-1)^i C(q,i)^2 fall(t-x, q-i) fall(x, i) with integer coefficients)
    and divided once at the end; this avoids per-step rational reduction,
    which dominates at the q ~ 100 sizes the exact-setting PTFs need.
    """
    if q < 0 or t < 1:
        raise ValueError("need q >= 0 and t >= 1")
    if q > t:
        raise InvalidDegreeError(f"discrete Chebyshev needs q <= t, got q={q}, t={t}")
    fall_x = [[1]]          # fall(x, i) coefficients
    for i in range(q):
        fall_x.append(_int_poly_mul(fall_x[-1], [-i, 1]))
    fall_tx = [[1]]         # fall(t - x, j) coefficients
    for j in range(q):
        fall_tx.append(_int_poly_mul(fall_tx[-1], [t - j, -1]))
    total = [0] * (q + 1)
    for i in range(q + 1):
        coeff = (-1) ** i * comb(q, i) ** 2
        term = _int_poly_mul(fall_tx[q - i], fall_x[i])
        for j, v in enumerate(term):
            total[j] += coeff * v
    scale = Fraction(1, factorial(q))
    return UnivariatePoly.from_coeffs([v * scale for v in total])


def discrete_chebyshev_norm(q: int, t: int) -> Fraction:
    """c_{q,t} = (t+1)^(q+1) / q!, the in-window bound from the L2 identity."""
    return Fraction((t + 1) ** (q + 1), factorial(q))


# ---------------------------------------------------------------------------
# deterministic threshold PTF


def _chebyshev_q(s: float, eps: Fraction) -> int:
    return max(1, math.ceil(math.sqrt(1.0 / float(eps)) * math.log(2.0 * s)))


def _discrete_q(s: float, t: int) -> int:
    return math.ceil(math.sqrt(8.0 * (t + 1) * math.log(max(float(s), t + 1.0))))


def _validate_ptf_args(s: float, t: int, eps) -> Fraction:
    if s < 2:
        raise InvalidAmplificationError(f"amplification s must be >= 2, got {s}")
    if t < 1:
        raise ValueError("t must be a positive integer")
    eps = as_fraction(eps)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    return eps


def ptf_threshold_degree(s: float, t: int, eps) -> int:
    """Degree the construction below will produce, without building it."""
    eps = _validate_ptf_args(s, t, eps)
    if eps > Fraction(1, t):
        return _chebyshev_q(s, eps)
    q = _discrete_q(s, t)
    return q if q <= t else _chebyshev_q(s, eps)


@lru_cache(maxsize=512)
def _ptf_threshold_cached(s: float, t: int, eps: Fraction) -> UnivariatePoly:
    if eps > Fraction(1, t):
        return chebyshev(_chebyshev_q(s, eps)).compose_affine(Fraction(1, t), 0)
    q = _discrete_q(s, t)
    if q > t:
        return chebyshev(_chebyshev_q(s, eps)).compose_affine(Fraction(1, t), 0)
    d = discrete_chebyshev(q, t).compose_affine(-1, t)  # D_{q,t}(t - x)
    return d.scale(1 / discrete_chebyshev_norm(q, t))


def ptf_threshold(s: float, t: int, eps) -> UnivariatePoly:
    """Three-band threshold polynomial P_{s,t,eps}.

    Contract at exact rationals: |P(x)| <= 1 for x in {0..t};  P(x) > 1 on
    the open band (t, (1+eps)t);  P(x) >= s for x >= (1+eps)t.

    For eps > 1/t this is the scaled Chebyshev T_q(x/t) with
    q = ceil(sqrt(1/eps) ln(2s)).  In the exact setting (eps <= 1/t) it is
    the normalized discrete Chebyshev D_{q,t}(t-x)/c_{q,t} with
    q = ceil(sqrt(8(t+1) ln max(s, t+1))), whose bands hold at integer
    points; when that q would exceed t (small t), the construction falls
    back to the scaled Chebyshev, which is valid for every eps.
    Constructions are cached by their parameters.
    """
    eps = _validate_ptf_args(s, t, eps)
    return _ptf_threshold_cached(float(s), t, eps)
