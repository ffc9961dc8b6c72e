"""Window exactness, recursion structure, and statistical agreement of the
sampled threshold polynomials."""

import math
from fractions import Fraction

import numpy as np
import pytest

from threshpoly.prob_threshold import (
    SampledThresholdPoly,
    empirical_error,
    eval_sampled,
    sample_threshold_poly,
    structural_degree,
    threshold_value,
    wilson_interval,
    window_poly,
)
from threshpoly.randomness import Seed
from threshpoly.univariate import from_binomial_basis


def test_window_single_point_is_constant():
    w = window_poly(100, Fraction(1, 2), 0.01)
    assert w.lo == w.hi == 50
    assert w.degree == 0
    assert w.eval_at_int(50) == 1  # 50/100 >= 1/2


@pytest.mark.parametrize("n,theta,g", [(100, Fraction(1, 2), 1.0), (64, Fraction(1, 3), 2.0), (30, Fraction(9, 10), 1.5)])
def test_window_exact_on_window(n, theta, g):
    w = window_poly(n, theta, g)
    for y in range(w.lo, w.hi + 1):
        assert w.eval_at_int(y) == threshold_value(y, n, theta)


def test_window_n100_half_g1_agrees_on_40_60():
    w = window_poly(100, Fraction(1, 2), 1.0)
    assert w.lo <= 40 and w.hi >= 60
    for y in range(40, 61):
        assert w.eval_at_int(y) == (1 if y >= 50 else 0)


@pytest.mark.parametrize("n,g", [(100, 1.0), (400, 2.0), (900, 0.7), (50, 3.0)])
def test_window_degree_bound(n, g):
    w = window_poly(n, Fraction(1, 2), g)
    assert w.degree <= 2 * g * math.sqrt(n) + 1


def test_window_binomial_view_matches_newton_eval():
    w = window_poly(40, Fraction(1, 2), 1.2)
    poly = from_binomial_basis(w.inner)
    for y in range(0, 41):
        assert poly.eval(y) == w.eval_at_int(y)


def test_window_full_range_is_exact_indicator():
    w = window_poly(23, Fraction(2, 7), None)
    for y in range(24):
        assert w.eval_at_int(y) == threshold_value(y, 23, Fraction(2, 7))


def test_sample_n1_is_exact_on_both_inputs():
    sp = sample_threshold_poly(1, Fraction(1, 2), 4, Seed(7))
    assert sp.levels == ()
    assert eval_sampled(sp, [0]) == 0
    assert eval_sampled(sp, [1]) == 1


def test_base_case_only_is_deterministic_indicator():
    sp = sample_threshold_poly(40, Fraction(1, 2), 8, Seed(1))
    assert sp.random_bits == 0
    for ones in (0, 13, 20, 27, 40):
        x = np.zeros(40, dtype=np.uint8)
        x[:ones] = 1
        assert eval_sampled(sp, x) == (1 if ones >= 20 else 0)


def test_sampling_reproducible_and_level_shape():
    a = sample_threshold_poly(200, Fraction(1, 2), 10, Seed(5))
    b = sample_threshold_poly(200, Fraction(1, 2), 10, Seed(5))
    assert a == b
    assert len(a.levels) == 1
    assert a.levels[0].m == 200 and a.levels[0].m_next == 20
    k_expected = math.floor(20 * math.exp(-1 / 3) * math.log(4 * 10))
    assert a.levels[0].k == k_expected
    assert a.random_bits == k_expected * math.ceil(math.log2(a.levels[0].prime))


def test_level_ladder_n1600():
    sp = sample_threshold_poly(1600, Fraction(1, 2), 4, Seed(2))
    assert [lv.m for lv in sp.levels] == [1600, 160]
    assert [lv.m_next for lv in sp.levels] == [160, 16]


def test_eval_dimension_mismatch():
    sp = sample_threshold_poly(10, Fraction(1, 2), 4, Seed(0))
    with pytest.raises(ValueError):
        eval_sampled(sp, [0, 1])


def test_all_zero_and_all_one_inputs_statistically():
    s = 8.0
    n = 120
    errs0 = errs1 = 0
    trials = 200
    for i in range(trials):
        sp = sample_threshold_poly(n, Fraction(1, 2), s, Seed(33).derive(i))
        errs0 += eval_sampled(sp, np.zeros(n, dtype=np.uint8)) != 0
        errs1 += eval_sampled(sp, np.ones(n, dtype=np.uint8)) != 1
    bound = trials * (1 / s) + 3 * math.sqrt(trials * (1 / s))
    assert errs0 <= bound
    assert errs1 <= bound


def test_theta_zero_is_constant_one():
    reports = empirical_error(60, 0, 4, 100, Seed(9))
    assert all(r.errors == 0 for r in reports)


def test_empirical_error_n200_s10():
    reports = empirical_error(200, Fraction(1, 2), 10, 300, Seed(17))
    for r in reports:
        se = math.sqrt(0.1 * 0.9 / r.trials)
        assert r.rate <= 0.1 + 3 * se, (r.label, r.rate)


def test_degree_is_structural_and_bounded():
    # Degrees do not depend on the drawn index maps, only on parameters.
    d1 = sample_threshold_poly(500, Fraction(1, 2), 20, Seed(1)).degree
    d2 = sample_threshold_poly(500, Fraction(1, 2), 20, Seed(999)).degree
    assert d1 == d2 == structural_degree(500, 1, 2, 20.0)
    c_deg = 24.0
    for n, s in [(100, 4.0), (200, 10.0), (400, 4.0), (500, 20.0), (1600, 4.0), (1600, 20.0)]:
        d = structural_degree(n, 1, 2, s)
        assert d <= c_deg * math.sqrt(n * math.log(s)), (n, s, d)


def test_random_bit_budget_shape():
    # Budget grows like log(n) * log(n*s) within a factor of 2 across a ladder.
    c_bits = 10.0
    for n, s in [(100, 4.0), (200, 10.0), (500, 20.0), (1024, 16.0)]:
        sp = sample_threshold_poly(n, Fraction(1, 2), s, Seed(3))
        f = c_bits * math.log(n) * math.log(n * s)
        assert f / 2 <= sp.random_bits <= 2 * f, (n, s, sp.random_bits, f)


def test_wilson_interval_sane():
    low, high = wilson_interval(5, 100)
    assert 0 <= low < 0.05 < high <= 1


def test_eval_sampled_mod2_flag():
    sp = sample_threshold_poly(30, Fraction(1, 2), 4, Seed(2))
    x = np.ones(30, dtype=np.uint8)
    assert eval_sampled(sp, x, mod2=True) == eval_sampled(sp, x) % 2 == 1
    assert eval_sampled(sp, np.zeros(30, dtype=np.uint8), mod2=True) == 0
