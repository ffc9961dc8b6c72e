"""Probabilistic polynomial threshold functions and OR-of-threshold sums.

A sampled PTF multiplies two parts: an inner probabilistic threshold
polynomial evaluated on a k-wise sampled subset R of the input positions
(it acts as a gate that is 0 well below the threshold and 1 above), and an
outer deterministic three-band polynomial applied to the full popcount
shifted by an integer anchor t_minus.  The anchor is floored to an integer
on purpose: the discrete-Chebyshev outer polynomial guarantees its bands
at integer arguments only.

Aggregates for an OR of thresholds sum one polynomial per block; the sum
is at most s in absolute value when the OR is false and exceeds 2s when
some block clears the margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .prob_threshold import SampledThresholdPoly, eval_sampled, sample_threshold_poly
from .randomness import Seed, as_seed, kwise_indices, new_kwise, random_bit_budget
from .univariate import UnivariatePoly, as_fraction, ptf_threshold

_TAG_R = 0x5A3        # index-sample stream
_TAG_INNER = 0x1BB    # inner threshold sampler stream
_TAG_BLOCK = 0x0B10   # per-block streams of OR aggregates

_KWISE_SCALE = 20.0 * math.exp(-1.0 / 3.0)


class DegenerateWindowError(ValueError):
    """Parameters force an empty outer window; use the deterministic PTF."""


def _sample_size(n: int, s: float, eps: Fraction) -> int:
    if eps <= Fraction(1, n):  # exact setting
        r = math.ceil(n ** (2 / 3) * math.log(n * s) ** (1 / 3))
    else:
        r = math.ceil((1.0 / float(eps)) ** (2 / 3) * math.log(s))
    r = max(r, math.ceil(math.log(s)), 1)
    return min(r, n)


@dataclass(frozen=True, eq=False)
class ProbPtfSample:
    """One drawn probabilistic PTF with all its derived parameters.

    Three-band contract, each band holding with probability >= 1 - 1/s
    over the draw: sum(x) <= t implies |value| <= 1; sum(x) in (t, t+eps*n)
    implies value > 1; sum(x) >= t + eps*n implies value >= s.
    """

    n: int
    s: float
    t: int
    eps: Fraction
    c0: float
    r: int
    R: tuple[int, ...]
    t_R: Fraction
    theta_inner: Fraction
    t_minus: int
    t_prime: int
    eps_prime: Fraction
    inner: SampledThresholdPoly
    outer: UnivariatePoly
    r_bits: int

    def __post_init__(self):
        object.__setattr__(self, "_outer_values", {})

    def __eq__(self, other):
        if not isinstance(other, ProbPtfSample):
            return NotImplemented
        return (
            self.n, self.s, self.t, self.eps, self.c0, self.r, self.R,
            self.t_R, self.t_minus, self.inner, self.outer,
        ) == (
            other.n, other.s, other.t, other.eps, other.c0, other.r, other.R,
            other.t_R, other.t_minus, other.inner, other.outer,
        )

    def outer_value(self, total: int) -> Fraction:
        """Cached exact outer evaluation at the shifted popcount."""
        got = self._outer_values.get(total)
        if got is None:
            got = self.outer.eval(total - self.t_minus)
            self._outer_values[total] = got
        return got

    @property
    def degree(self) -> int:
        return self.inner.degree + self.outer.degree

    @property
    def random_bits(self) -> int:
        return self.r_bits + self.inner.random_bits


def _derive_params(n: int, s: float, t: int, eps: Fraction, c0: float):
    """Seed-independent parameters: r, t_R, theta_inner, t_minus, t', eps'."""
    r = _sample_size(n, s, eps)
    log_s = math.log(s)
    t_R = Fraction(t * r, n) - Fraction(repr(c0 * math.sqrt(r * log_s)))
    theta_inner = t_R / r
    t_minus = math.floor(t - 2.0 * c0 * (n / math.sqrt(r)) * math.sqrt(log_s))
    t_prime = t - t_minus
    if t_prime <= 0:
        raise DegenerateWindowError(f"outer window collapsed: t'={t_prime}")
    eps_prime = eps * n / t_prime
    if eps_prime > 1:
        raise DegenerateWindowError(
            f"outer band eps'={float(eps_prime):.3f} > 1; use the deterministic PTF"
        )
    return r, t_R, theta_inner, t_minus, t_prime, eps_prime


def _validate_ptf_inputs(n: int, s: float, t: int, eps) -> Fraction:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 <= t <= n:
        raise ValueError("t must lie in [0, n]")
    if s < 2:
        raise ValueError("s must be >= 2")
    eps = as_fraction(eps)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    return eps


def prob_ptf_structural_degree(n: int, s: float, t: int, eps, c0: float = 2.0) -> int:
    """Degree any sample at these parameters will have, without drawing
    one (the sampled index maps never affect the degree)."""
    from .prob_threshold import structural_degree
    from .univariate import ptf_threshold_degree

    eps = _validate_ptf_inputs(n, s, t, eps)
    r, _, theta_inner, _, t_prime, eps_prime = _derive_params(n, s, t, eps, c0)
    inner_deg = structural_degree(r, theta_inner.numerator, theta_inner.denominator, 2.0 * s)
    return inner_deg + ptf_threshold_degree(s, t_prime, eps_prime)


def sample_prob_ptf(
    n: int,
    s: float,
    t: int,
    eps,
    seed: "Seed | int | str",
    c0: float = 2.0,
) -> ProbPtfSample:
    """Draw a probabilistic PTF for the popcount threshold at t on n bits.

    The sample size is r = ceil((1/eps)^(2/3) log s), or
    ceil(n^(2/3) log^(1/3)(ns)) in the exact setting eps <= 1/n; r is
    clamped to [max(log s, 1), n], and r = n forces R to be the identity.
    """
    eps = _validate_ptf_inputs(n, s, t, eps)
    seed = as_seed(seed)
    r, t_R, theta_inner, t_minus, t_prime, eps_prime = _derive_params(n, s, t, eps, c0)
    if r == n:
        R: tuple[int, ...] = tuple(range(n))
        r_bits = 0
    else:
        k_r = max(1, math.floor(_KWISE_SCALE * math.log(8.0 * s)))
        gen = new_kwise(k_r, domain=n, seed=seed.derive(_TAG_R))
        R = tuple(kwise_indices(gen, r, n))
        r_bits = random_bit_budget(gen)
    inner = sample_threshold_poly(r, theta_inner, 2.0 * s, seed.derive(_TAG_INNER))
    outer = ptf_threshold(s, t_prime, eps_prime)
    return ProbPtfSample(
        n=n, s=float(s), t=t, eps=eps, c0=c0, r=r, R=R, t_R=t_R,
        theta_inner=theta_inner, t_minus=t_minus, t_prime=t_prime,
        eps_prime=eps_prime, inner=inner, outer=outer, r_bits=r_bits,
    )


def eval_prob_ptf(p: ProbPtfSample, x) -> Fraction:
    """Exact evaluation of the product form on a Boolean vector."""
    vec = np.asarray(x, dtype=np.uint8)
    if vec.shape != (p.n,):
        raise ValueError(f"expected a Boolean vector of length {p.n}")
    gate = eval_sampled(p.inner, vec[np.array(p.R, dtype=np.intp)])
    if gate == 0:
        return Fraction(0)
    return gate * p.outer_value(int(vec.sum()))


# ---------------------------------------------------------------------------
# OR-of-threshold aggregates


@dataclass(frozen=True)
class DetOrThresholds:
    """Sum of s copies of a deterministic PTF, one per n-bit block.

    If every block popcount is <= t the sum is at most s in absolute value;
    if some block popcount reaches t + eps*n the sum exceeds 2s.
    """

    n: int
    s: int
    t: int
    eps: Fraction
    block: UnivariatePoly

    @property
    def degree(self) -> int:
        return self.block.degree

    @property
    def low_bound(self) -> int:
        return self.s

    @property
    def fire_bound(self) -> int:
        return 2 * self.s

    def eval_sums(self, sums) -> Fraction:
        return sum((self.block.eval(y) for y in sums), Fraction(0))

    def eval_bits(self, bits) -> Fraction:
        arr = np.asarray(bits, dtype=np.uint8).reshape(self.s, self.n)
        return self.eval_sums(int(row.sum()) for row in arr)


def _block_eps(n: int, t: int, eps: Fraction) -> Fraction:
    # The OR margin is stated at popcount t + eps*n; the univariate PTF's
    # band is relative to t, so rescale.  Clamping at 1 only moves the
    # amplified band earlier, which preserves the aggregate contract.
    return min(eps * n / t, Fraction(1))


def or_thresholds_det(n: int, s: int, t: int, eps) -> DetOrThresholds:
    if t < 1:
        raise ValueError("t must be >= 1 for OR aggregates")
    eps = as_fraction(eps)
    block = ptf_threshold(3 * s, t, _block_eps(n, t, eps))
    return DetOrThresholds(n=n, s=s, t=t, eps=eps, block=block)


@dataclass(frozen=True)
class ProbOrThresholds:
    """Sum of s independently drawn probabilistic PTFs, one per block.

    With per-block error 1/(3s) a union bound gives both aggregate bands
    with probability >= 2/3; block_error overrides the per-block budget.
    """

    n: int
    s: int
    t: int
    eps: Fraction
    samples: tuple[ProbPtfSample, ...]

    @property
    def degree(self) -> int:
        return max(p.degree for p in self.samples)

    @property
    def low_bound(self) -> int:
        return self.s

    @property
    def fire_bound(self) -> int:
        return 2 * self.s

    @property
    def random_bits(self) -> int:
        return sum(p.random_bits for p in self.samples)

    def eval_blocks(self, blocks) -> Fraction:
        total = Fraction(0)
        for p, block in zip(self.samples, blocks, strict=True):
            total += eval_prob_ptf(p, block)
        return total

    def eval_bits(self, bits) -> Fraction:
        arr = np.asarray(bits, dtype=np.uint8).reshape(self.s, self.n)
        return self.eval_blocks(arr)


def or_thresholds_prob(
    n: int,
    s: int,
    t: int,
    eps,
    seed: "Seed | int | str",
    block_error: float | None = None,
    c0: float = 2.0,
) -> ProbOrThresholds:
    eps = as_fraction(eps)
    seed = as_seed(seed)
    amp = 3.0 * s if block_error is None else 1.0 / block_error
    samples = tuple(
        sample_prob_ptf(n, amp, t, eps, seed.derive(_TAG_BLOCK, i), c0=c0)
        for i in range(s)
    )
    return ProbOrThresholds(n=n, s=s, t=t, eps=eps, samples=samples)


# ---------------------------------------------------------------------------
# c0 calibration


def calibrate_c0(
    n: int,
    s: float,
    t: int,
    eps,
    seed: "Seed | int | str",
    trials: int = 200,
    start: float = 2.0,
    step: float = 0.5,
    max_c0: float = 6.0,
) -> float:
    """Raise c0 until measured gate failures drop below 1/(4s).

    Failures counted are the two Chernoff events of the analysis: the gate
    staying open on an input just below the anchor (when the anchor is
    positive) and the gate staying closed on an input just above t.
    """
    seed = as_seed(seed)
    eps = as_fraction(eps)
    c0 = start
    while True:
        fail = 0
        checked = 0
        for i in range(trials):
            p = sample_prob_ptf(n, s, t, eps, seed.derive(i), c0=c0)
            above = _input_with_ones(n, min(n, t + 1), seed.derive(i, 1))
            gate = eval_sampled(p.inner, above[np.array(p.R, dtype=np.intp)])
            fail += gate != 1
            checked += 1
            if p.t_minus > 0:
                below = _input_with_ones(n, max(0, p.t_minus - 1), seed.derive(i, 2))
                gate = eval_sampled(p.inner, below[np.array(p.R, dtype=np.intp)])
                fail += gate != 0
                checked += 1
        if fail / checked <= 1.0 / (4.0 * s) or c0 >= max_c0:
            return c0
        c0 += step


def _input_with_ones(n: int, ones: int, seed: Seed) -> np.ndarray:
    from .randomness import Stream

    order = np.argsort(Stream(seed).u64_block(n), kind="stable")
    x = np.zeros(n, dtype=np.uint8)
    x[order[:ones]] = 1
    return x
