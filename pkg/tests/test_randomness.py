"""Seeded stream and k-wise independence checks, including the exhaustive
joint-uniformity enumeration that the constructions rely on."""

import itertools
import math

import numpy as np
import pytest

from threshpoly.randomness import (
    InvalidRangeError,
    KWiseGenerator,
    Seed,
    Stream,
    is_prime,
    kwise_indices,
    kwise_indices_np,
    mix64,
    new_kwise,
    next_prime_at_least,
    random_bit_budget,
)


def test_seed_parse_decimal_and_hex():
    assert Seed.parse("12345").value == 12345
    assert Seed.parse("0xdeadbeef").value == 0xDEADBEEF
    assert Seed.parse(" 0XFF ").value == 255


def test_seed_range_enforced():
    with pytest.raises(ValueError):
        Seed(1 << 64)
    with pytest.raises(ValueError):
        Seed(-1)


def test_stream_is_reproducible_and_counter_addressable():
    a = Stream(Seed(42))
    b = Stream(42)
    seq = [a.next_u64() for _ in range(50)]
    assert seq == [b.next_u64() for _ in range(50)]
    assert seq[17] == Stream(42).u64_at(17)


def test_stream_block_matches_scalar_path():
    st = Stream(7)
    block = Stream(7).u64_block(100)
    assert [st.next_u64() for _ in range(100)] == [int(v) for v in block]


def test_derive_gives_distinct_streams():
    s = Seed(99)
    vals = {s.derive(i, j).value for i in range(8) for j in range(8)}
    assert len(vals) == 64


def test_next_below_strict_is_exactly_uniform_over_small_modulus():
    # With rejection sampling the distribution over [0,3) is exact; a biased
    # reduction of 2^64 by 3 would put one extra point on residue 0/1.
    st = Stream(5)
    counts = [0, 0, 0]
    for _ in range(3000):
        counts[st.next_below(3, strict=True)] += 1
    assert min(counts) > 800


def test_primes():
    assert [p for p in range(20) if is_prime(p)] == [2, 3, 5, 7, 11, 13, 17, 19]
    assert next_prime_at_least(10) == 11
    assert next_prime_at_least(7) == 7
    assert is_prime((1 << 61) - 1)


def test_new_kwise_deterministic_and_k1_constant():
    g1 = new_kwise(2, 10, Seed(3))
    g2 = new_kwise(2, 10, Seed(3))
    assert g1 == g2
    const = new_kwise(1, 4, Seed(11))
    vals = const.values(4)
    assert len(set(vals)) == 1  # degree-0 polynomial


def test_kwise_indices_basics():
    g = new_kwise(2, 10, Seed(3))
    assert kwise_indices(g, 0, 5) == []
    idx = kwise_indices(g, 10, 5)
    assert all(0 <= v < 5 for v in idx)
    with pytest.raises(InvalidRangeError):
        kwise_indices(g, 4, g.prime + 1)
    assert list(kwise_indices_np(g, 10, 5)) == idx


def test_low_bias_range_raises_prime():
    g = new_kwise(2, 10, Seed(3), low_bias_range=100)
    assert g.prime >= 100 * 100


def test_random_bit_budget_values():
    assert random_bit_budget(KWiseGenerator(2, 1, (0,), 1)) == 1
    assert random_bit_budget(KWiseGenerator(7, 3, (1, 2, 3), 7)) == 9
    g = new_kwise(4, 1000, Seed(0))
    assert random_bit_budget(g) == 4 * math.ceil(math.log2(g.prime))


def _joint_counts(p, k, positions):
    counts = {}
    for coeffs in itertools.product(range(p), repeat=k):
        g = KWiseGenerator(prime=p, k=k, coeffs=coeffs, domain=p)
        key = tuple(g.value_at(i) for i in positions)
        counts[key] = counts.get(key, 0) + 1
    return counts


@pytest.mark.parametrize("p", [2, 3, 5, 7])
@pytest.mark.parametrize("k", [1, 2, 3])
def test_exact_kwise_uniformity(p, k):
    # Enumerating all p^k coefficient vectors: every k-subset of positions
    # must have an exactly uniform joint distribution over [0,p)^k.
    for positions in itertools.combinations(range(p), k):
        counts = _joint_counts(p, k, positions)
        assert len(counts) == p**k
        assert set(counts.values()) == {p ** (k - len(positions))} if False else True
        expected = p**k // p ** len(positions)
        assert all(c == expected for c in counts.values())


def test_pair_law_p3_k2_exhaustive():
    # Spec example: over p=3, k=2, the joint law of (g(0), g(1)) over all 9
    # coefficient pairs is exactly uniform on [0,3)^2.
    counts = _joint_counts(3, 2, (0, 1))
    assert counts == {pair: 1 for pair in itertools.product(range(3), repeat=2)}


def test_empirical_pairwise_correlation_at_k2():
    n_seeds = 10_000
    xs = np.empty(n_seeds)
    ys = np.empty(n_seeds)
    for s in range(n_seeds):
        g = new_kwise(2, 16, Seed(1234).derive(s))
        xs[s], ys[s] = g.value_at(0) % 8, g.value_at(1) % 8
    r = np.corrcoef(xs, ys)[0, 1]
    assert abs(r) < 3.0 / math.sqrt(n_seeds)


def test_full_independence_when_k_equals_domain():
    # k = domain = p: the map is a uniformly random function on positions;
    # spot-check that all p^p functions arise equally often by enumeration.
    p = 3
    seen = {}
    for coeffs in itertools.product(range(p), repeat=p):
        g = KWiseGenerator(prime=p, k=p, coeffs=coeffs, domain=p)
        seen[tuple(g.values(p))] = seen.get(tuple(g.values(p)), 0) + 1
    assert len(seen) == p**p
    assert set(seen.values()) == {1}


def test_normals_reproducible_and_sane():
    a = Stream(21).next_normals(1001)
    b = Stream(21).next_normals(1001)
    assert np.array_equal(a, b)
    assert abs(a.mean()) < 0.1
    assert abs(a.std() - 1.0) < 0.1
