"""Low-randomness probabilistic polynomials for threshold functions.

A sampled polynomial M for TH_theta on n bits is built recursively: an
exact window polynomial A answers correctly when the popcount lands near
theta*n, a selector S (built from two recursive samples at shifted
thresholds) decides whether to trust A, and otherwise the value comes
from a recursive sample on a k-wise independently chosen 1/10 subsample.
Randomness is consumed only by the per-level index maps, so the total
random-bit budget is a few field elements per level.

Boundary convention throughout: TH_theta(x) = [sum(x)/n >= theta], with
theta*n compared as an exact rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from .randomness import Seed, as_seed, kwise_indices, new_kwise, random_bit_budget
from .univariate import BinomialBasisPoly, as_fraction

# Recursion constants.  SUBSAMPLE and ERROR_SHRINK are from the recursive
# construction (divide n by 10 and the error by 4 per level); BASE_ARITY is
# the design cutoff below which an exact full-range interpolation is used.
SUBSAMPLE = 10
ERROR_SHRINK = 4
BASE_ARITY = 50

_KWISE_SCALE = 20.0 * math.exp(-1.0 / 3.0)

# Tags for seed derivation, module-unique.
_TAG_LEVEL = 0x5E11

_WINDOW_CACHE: dict[tuple, "WindowPoly"] = {}


def threshold_value(count: int, n: int, theta: Fraction) -> int:
    """TH_theta on a popcount: [count/n >= theta] with exact comparison."""
    return 1 if count * theta.denominator >= theta.numerator * n else 0


@dataclass
class WindowPoly:
    """Exact interpolation of TH_theta on the integer window [lo, hi].

    The interpolant is stored in the Newton forward-difference form around
    lo, whose coefficients are integers because the node values are; the
    standard-basis BinomialBasisPoly view is materialized on demand.  For
    integer y in the window the value equals the 0/1 indicator exactly;
    outside the window it is arbitrary.  Degree is hi - lo <= 2g*sqrt(n)+1.
    """

    n: int
    theta: Fraction
    halfwidth: float
    lo: int
    hi: int
    _diffs: tuple[int, ...] | None = field(default=None, repr=False)
    _values: dict[int, int] = field(default_factory=dict, repr=False)

    @property
    def center(self) -> Fraction:
        return self.theta * self.n

    @property
    def degree(self) -> int:
        return self.hi - self.lo

    def _ensure_diffs(self) -> tuple[int, ...]:
        if self._diffs is None:
            row = [threshold_value(y, self.n, self.theta) for y in range(self.lo, self.hi + 1)]
            diffs = [row[0]]
            for _ in range(len(row) - 1):
                row = [b - a for a, b in zip(row, row[1:])]
                diffs.append(row[0])
            self._diffs = tuple(diffs)
        return self._diffs

    def eval_at_int(self, y: int) -> int:
        """Exact value at integer y (cached); integral by construction."""
        got = self._values.get(y)
        if got is not None:
            return got
        diffs = self._ensure_diffs()
        acc = 0
        binom = 1  # C(y - lo, j), updated incrementally
        off = y - self.lo
        for j, d in enumerate(diffs):
            if j > 0:
                binom = binom * (off - (j - 1)) // j
            if d:
                acc += d * binom
        self._values[y] = acc
        return acc

    @property
    def inner(self) -> BinomialBasisPoly:
        """Standard C(y, j)-basis view of the interpolant (exact shift)."""
        diffs = self._ensure_diffs()
        out = [Fraction(0)] * len(diffs)
        # C(y - lo, j) = sum_i C(-lo, j - i) C(y, i); C(-lo, m) is an integer.
        for j, d in enumerate(diffs):
            if d == 0:
                continue
            for i in range(j + 1):
                m = j - i
                shift = (-1) ** m * comb(self.lo + m - 1, m) if m else 1
                if shift:
                    out[i] += d * shift
        return BinomialBasisPoly.from_coeffs(out)


def window_poly(n: int, theta, g: float | None) -> WindowPoly:
    """Exact window polynomial for TH_theta on [theta*n - g*sqrt(n), ... + g*sqrt(n)].

    g=None requests the full range [0, n] (the recursion's base case).
    Windows wider than [0, n] are clipped; a window missing [0, n] entirely
    collapses to the nearest single point.  Instances are cached by their
    parameters, which keeps repeated sampling cheap.
    """
    theta = as_fraction(theta)
    if n < 1 or (g is not None and g <= 0):
        raise ValueError("need n >= 1 and g > 0")
    if g is None:
        lo, hi, width = 0, n, float(n)
    else:
        width = g * math.sqrt(n)
        center = theta * n
        lo = max(0, math.ceil(center - Fraction(repr(width))))
        hi = min(n, math.floor(center + Fraction(repr(width))))
        if lo > hi:  # window contains no integer point; collapse to nearest
            lo = hi = min(n, max(0, round(float(center))))
    key = (n, theta.numerator, theta.denominator, lo, hi)
    cached = _WINDOW_CACHE.get(key)
    if cached is None:
        cached = WindowPoly(n=n, theta=theta, halfwidth=width, lo=lo, hi=hi)
        _WINDOW_CACHE[key] = cached
    return cached


# ---------------------------------------------------------------------------
# sampled threshold polynomials


@dataclass(frozen=True)
class Level:
    """One recursion level: a k-wise sampled index map m -> m_next."""

    m: int          # arity at this level
    m_next: int     # subsample arity
    eps: float      # error budget of this level's recursion
    a: float        # concentration margin parameter sqrt(10 ln(1/eps))
    delta: Fraction # threshold shift a / sqrt(m), rationalized
    k: int          # independence used to draw the index map
    prime: int
    index_map: tuple[int, ...]
    bits: int       # true random bits consumed by this level


@dataclass(frozen=True)
class SampledThresholdPoly:
    """A drawn probabilistic polynomial for TH_theta with its seed.

    The composite is evaluated bottom-up by eval_sampled; `degree` and
    `random_bits` account for the polynomial it denotes without expanding
    it.  Construction is a pure function of (n, theta, s, seed).
    """

    n: int
    theta: Fraction
    s: float
    seed: Seed
    levels: tuple[Level, ...]

    @property
    def base_arity(self) -> int:
        return self.levels[-1].m_next if self.levels else self.n

    @property
    def random_bits(self) -> int:
        return sum(lv.bits for lv in self.levels)

    @property
    def degree(self) -> int:
        return _tree_degree(self, 0, self.theta)

    def level_ks(self) -> list[int]:
        """Instrumentation: per-level independence parameters."""
        return [lv.k for lv in self.levels]


def _level_eps(s: float, j: int) -> float:
    # Error budget at recursion depth j (0 = outermost): eps_j = (1/s) / 4^j.
    return 1.0 / (float(s) * (ERROR_SHRINK**j))


def _level_k(s: float, j: int) -> int:
    # Independence for the level-j index map (j >= 1): floor(20 e^{-1/3} ln(4^j s)).
    return max(1, math.floor(_KWISE_SCALE * math.log((ERROR_SHRINK**j) * float(s))))


def _a_param(eps: float) -> float:
    # Concentration margin a = sqrt(10) * sqrt(ln(1/eps)).
    return math.sqrt(10.0) * math.sqrt(math.log(1.0 / eps))


def sample_threshold_poly(
    n: int,
    theta,
    s: float,
    seed: "Seed | int | str",
    base_arity: int = BASE_ARITY,
) -> SampledThresholdPoly:
    """Draw one probabilistic polynomial for TH_theta on n bits, error 1/s.

    Each level divides the arity by 10 (ceiling) and the error by 4 and
    samples the subvector positions k-wise independently; the recursion
    bottoms out at `base_arity` with an exact full-range interpolation.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if s < 2:
        raise ValueError("s must be >= 2")
    theta = as_fraction(theta)
    seed = as_seed(seed)
    levels = []
    m = n
    j = 0
    while m > base_arity:
        eps = _level_eps(s, j)
        k = _level_k(s, j + 1)
        m_next = -(-m // SUBSAMPLE)
        gen = new_kwise(k, domain=max(m, m_next), seed=seed.derive(_TAG_LEVEL, j + 1))
        index_map = tuple(kwise_indices(gen, m_next, m))
        a = _a_param(eps)
        levels.append(
            Level(
                m=m,
                m_next=m_next,
                eps=eps,
                a=a,
                delta=Fraction(repr(a / math.sqrt(m))),
                k=k,
                prime=gen.prime,
                index_map=index_map,
                bits=random_bit_budget(gen),
            )
        )
        m = m_next
        j += 1
    return SampledThresholdPoly(n=n, theta=theta, s=float(s), seed=seed, levels=tuple(levels))


def _window_for(sp: SampledThresholdPoly, level: int, theta: Fraction) -> WindowPoly:
    if level == len(sp.levels):
        m = sp.base_arity
        return window_poly(m, theta, None)
    lv = sp.levels[level]
    return window_poly(lv.m, theta, 2.0 * lv.a)


def _tree_degree(sp: SampledThresholdPoly, level: int, theta: Fraction) -> int:
    if level == len(sp.levels):
        return _window_for(sp, level, theta).degree
    lv = sp.levels[level]
    a_deg = _window_for(sp, level, theta).degree
    d_mid = _tree_degree(sp, level + 1, theta)
    d_up = _tree_degree(sp, level + 1, theta + lv.delta)
    d_dn = _tree_degree(sp, level + 1, theta - lv.delta)
    return max(a_deg, d_mid) + d_up + d_dn


def eval_sampled(sp: SampledThresholdPoly, x, mod2: bool = False) -> int:
    """Evaluate the composite exactly on a Boolean vector of length n.

    The output is the integer value of the sampled polynomial: 0/1 whenever
    the sample succeeded for this input, an arbitrary integer otherwise.
    mod2=True reduces the value into F_2 for parity-style uses (the
    polynomial itself is unchanged).
    """
    vec = np.asarray(x, dtype=np.uint8)
    if vec.shape != (sp.n,):
        raise ValueError(f"expected a Boolean vector of length {sp.n}")
    chain = [vec]
    for lv in sp.levels:
        chain.append(chain[-1][np.array(lv.index_map, dtype=np.intp)])
    counts = [int(v.sum()) for v in chain]
    memo: dict[tuple[int, Fraction], int] = {}

    def value(level: int, theta: Fraction) -> int:
        key = (level, theta)
        got = memo.get(key)
        if got is not None:
            return got
        if level == len(sp.levels):
            out = _window_for(sp, level, theta).eval_at_int(counts[level])
        else:
            lv = sp.levels[level]
            sel = (1 - value(level + 1, theta + lv.delta)) * value(level + 1, theta - lv.delta)
            if sel:
                out = _window_for(sp, level, theta).eval_at_int(counts[level]) * sel
                out += value(level + 1, theta) * (1 - sel)
            else:
                out = value(level + 1, theta) * (1 - sel)
        memo[key] = out
        return out

    result = value(0, sp.theta)
    return result % 2 if mod2 else result


# ---------------------------------------------------------------------------
# empirical error measurement


@dataclass(frozen=True)
class StratumReport:
    label: str
    ones: int
    trials: int
    errors: int
    rate: float
    wilson_low: float
    wilson_high: float


def wilson_interval(errors: int, trials: int, z: float = 3.0) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    phat = errors / trials
    denom = 1.0 + z * z / trials
    center = (phat + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


def _strata(n: int, theta: Fraction) -> list[tuple[str, int]]:
    boundary = -((-theta.numerator * n) // theta.denominator)  # ceil(theta*n)
    boundary = min(max(boundary, 0), n)
    raw = [
        ("far-below", boundary // 2),
        ("boundary-1", boundary - 1),
        ("boundary", boundary),
        ("boundary+1", boundary + 1),
        ("far-above", (boundary + n + 1) // 2),
    ]
    out, seen = [], set()
    for label, y in raw:
        y = min(max(y, 0), n)
        if y not in seen:
            seen.add(y)
            out.append((label, y))
    return out


def empirical_error(
    n: int,
    theta,
    s: float,
    trials: int,
    seed: "Seed | int | str",
    base_arity: int = BASE_ARITY,
) -> list[StratumReport]:
    """Per-stratum disagreement frequency with TH_theta over fresh samples.

    Strata fix the popcount; the positions of the ones are shuffled per
    trial from the seed so the estimate covers the per-input guarantee on
    average.  Wilson 3-sigma intervals are attached.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    theta = as_fraction(theta)
    seed = as_seed(seed)
    reports = []
    for si, (label, ones) in enumerate(_strata(n, theta)):
        want = threshold_value(ones, n, theta)
        errors = 0
        for trial in range(trials):
            sp = sample_threshold_poly(n, theta, s, seed.derive(si, trial), base_arity)
            x = _scattered_input(n, ones, seed.derive(si, trial, 0xF00D))
            if eval_sampled(sp, x) != want:
                errors += 1
        low, high = wilson_interval(errors, trials)
        reports.append(StratumReport(label, ones, trials, errors, errors / trials, low, high))
    return reports


def _scattered_input(n: int, ones: int, seed: Seed) -> np.ndarray:
    from .randomness import Stream

    order = np.argsort(Stream(seed).u64_block(n), kind="stable")
    x = np.zeros(n, dtype=np.uint8)
    x[order[:ones]] = 1
    return x


@lru_cache(maxsize=None)
def structural_degree(n: int, theta_num: int, theta_den: int, s: float, base_arity: int = BASE_ARITY) -> int:
    """Degree of any sample at these parameters (index maps do not affect it)."""
    sp = sample_threshold_poly(n, Fraction(theta_num, theta_den), s, Seed(0), base_arity)
    return sp.degree
