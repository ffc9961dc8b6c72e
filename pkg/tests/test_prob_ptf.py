"""Probabilistic PTF band behavior and the OR-of-threshold aggregates."""

import math
from fractions import Fraction

import numpy as np
import pytest

from threshpoly.prob_ptf import (
    DegenerateWindowError,
    calibrate_c0,
    eval_prob_ptf,
    or_thresholds_det,
    or_thresholds_prob,
    sample_prob_ptf,
)
from threshpoly.randomness import Seed, Stream


def _input_with_ones(n, ones, seed):
    order = np.argsort(Stream(seed).u64_block(n), kind="stable")
    x = np.zeros(n, dtype=np.uint8)
    x[order[:ones]] = 1
    return x


def test_sampling_deterministic_replay():
    a = sample_prob_ptf(120, 8, 60, Fraction(1, 10), Seed(4))
    b = sample_prob_ptf(120, 8, 60, Fraction(1, 10), Seed(4))
    assert a == b
    x = _input_with_ones(120, 55, Seed(1))
    assert eval_prob_ptf(a, x) == eval_prob_ptf(b, x)


def test_sample_size_formulas():
    # approximate setting
    p = sample_prob_ptf(300, 8, 150, Fraction(1, 10), Seed(0))
    assert p.r == max(math.ceil(10 ** (2 / 3) * math.log(8)), math.ceil(math.log(8)))
    # exact setting
    q = sample_prob_ptf(300, 8, 150, Fraction(1, 300), Seed(0))
    assert q.r == math.ceil(300 ** (2 / 3) * math.log(300 * 8) ** (1 / 3))
    assert q.eps_prime == Fraction(q.n, 300 * q.t_prime)


def test_forced_identity_sample_when_r_clamps_to_n():
    # Tiny n with huge log s forces r = n and the identity index map.
    p = sample_prob_ptf(4, 1000, 2, Fraction(1, 4), Seed(3))
    assert p.r == 4 and p.R == (0, 1, 2, 3)
    assert p.r_bits == 0


def test_dimension_mismatch():
    p = sample_prob_ptf(50, 4, 25, Fraction(1, 5), Seed(2))
    with pytest.raises(ValueError):
        eval_prob_ptf(p, [0, 1, 0])


def test_anchor_is_integer_and_window_positive():
    p = sample_prob_ptf(300, 8, 150, Fraction(1, 10), Seed(5))
    assert isinstance(p.t_minus, int)
    assert p.t_prime == p.t - p.t_minus >= 1


def test_all_zero_input_case1_exact_setting():
    # Exact setting at t = n/2 puts the gate threshold well above 0, so the
    # all-zeros input evaluates to exactly 0 unless the inner sample fails.
    n, s = 300, 8.0
    zeros = np.zeros(n, dtype=np.uint8)
    bad = 0
    trials = 300
    for i in range(trials):
        p = sample_prob_ptf(n, s, 150, Fraction(1, n), Seed(77).derive(i))
        assert p.t_R > 0
        bad += eval_prob_ptf(p, zeros) != 0
    assert bad <= trials / s + 3 * math.sqrt(trials * (1 / s))


def _band_of(total, t, eps_n):
    if total <= t:
        return 0
    if total < t + eps_n:
        return 1
    return 2


@pytest.mark.parametrize("eps", [Fraction(1, 10), Fraction(1, 300)])
def test_band_failure_rates_n300_s8(eps):
    n, s, t = 300, 8.0, 150
    eps_n = float(eps) * n
    trials = 250
    strata = sorted({0, t - 1, t, t + 1, min(n, t + int(eps_n) + 1), n})
    fails = {y: 0 for y in strata}
    for i in range(trials):
        p = sample_prob_ptf(n, s, t, eps, Seed(99).derive(i))
        for y in strata:
            x = _input_with_ones(n, y, Seed(5).derive(i, y))
            v = eval_prob_ptf(p, x)
            band = _band_of(y, t, eps_n)
            ok = (abs(v) <= 1) if band == 0 else (v > 1) if band == 1 else (v >= s)
            fails[y] += not ok
    bound = trials / s + 3 * math.sqrt(trials * (1 / s) * (1 - 1 / s))
    for y, f in fails.items():
        assert f <= bound, (y, f, bound)


def test_degree_instrumentation_approx_setting():
    p = sample_prob_ptf(300, 8, 150, Fraction(1, 10), Seed(1))
    # record the constant: degree <= C * (1/eps)^(1/3) * log s with C = 30
    assert p.degree <= 30 * (10 ** (1 / 3)) * math.log(8)
    assert p.random_bits == p.r_bits + p.inner.random_bits > 0


def test_degenerate_window_raises():
    # Normal parameters never collapse the window (t' = ceil(margin) >= 1);
    # a zero calibration constant does, and must be rejected loudly.
    with pytest.raises(DegenerateWindowError):
        sample_prob_ptf(40, 2, 2, Fraction(1, 2), Seed(0), c0=0.0)


def test_or_det_s1_reduces_to_single_block():
    agg = or_thresholds_det(10, 1, 5, Fraction(1, 5))
    assert agg.low_bound == 1 and agg.fire_bound == 2
    assert agg.eval_sums([3]) == agg.block.eval(3)


def test_or_det_exhaustive_contract_s3():
    n, s, t, eps = 10, 3, 5, Fraction(1, 5)
    agg = or_thresholds_det(n, s, t, eps)
    margin = t + eps * n  # popcount 7
    for sums in [(0, 0, 0), (5, 5, 5), (1, 3, 5), (7, 0, 0), (0, 5, 9), (7, 7, 7), (5, 5, 10)]:
        v = agg.eval_sums(sums)
        if all(y <= t for y in sums):
            assert abs(v) <= s, (sums, v)
        if any(y >= margin for y in sums):
            assert v > 2 * s, (sums, v)


def test_or_det_matches_blockwise_direct_eval():
    agg = or_thresholds_det(8, 2, 4, Fraction(1, 4))
    bits = np.array([[1, 1, 0, 0, 1, 0, 0, 0], [1, 1, 1, 1, 1, 1, 0, 0]], dtype=np.uint8)
    direct = sum(agg.block.eval(int(r.sum())) for r in bits)
    assert agg.eval_bits(bits) == direct


def test_or_prob_replay_and_statistical_bands():
    n, s, t = 100, 4, 50
    eps = Fraction(1, 10)
    agg1 = or_thresholds_prob(n, s, t, eps, Seed(11))
    agg2 = or_thresholds_prob(n, s, t, eps, Seed(11))
    bits = np.vstack([_input_with_ones(n, y, Seed(i)) for i, y in enumerate((10, 20, 30, 40))])
    assert agg1.eval_bits(bits) == agg2.eval_bits(bits)

    trials = 60
    low_fail = fire_fail = 0
    for i in range(trials):
        agg = or_thresholds_prob(n, s, t, eps, Seed(50).derive(i))
        low = np.vstack([_input_with_ones(n, 40, Seed(i).derive(b)) for b in range(s)])
        hot = np.vstack(
            [_input_with_ones(n, 70 if b == 0 else 10, Seed(i).derive(100 + b)) for b in range(s)]
        )
        low_fail += not abs(agg.eval_bits(low)) <= s
        fire_fail += not agg.eval_bits(hot) > 2 * s
    assert low_fail <= trials / 3 + 3 * math.sqrt(trials * (1 / 3) * (2 / 3))
    assert fire_fail <= trials / 3 + 3 * math.sqrt(trials * (1 / 3) * (2 / 3))


def test_calibrate_c0_returns_workable_constant():
    c0 = calibrate_c0(100, 4.0, 50, Fraction(1, 10), Seed(8), trials=60)
    assert 2.0 <= c0 <= 6.0
