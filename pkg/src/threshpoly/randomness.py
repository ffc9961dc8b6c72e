"""Seeded deterministic randomness and k-wise independent sample spaces.

Every probabilistic construction in this package draws randomness through
this module, so a run is a pure function of its 64-bit seed.  The base
stream is SplitMix64 (fixed published constants).  It is counter based:
position i of a stream is computable without generating positions 0..i-1,
which keeps parallel code seed-deterministic regardless of scheduling.

k-wise independence uses the classical polynomial construction over a
prime field: g(i) = sum_j c_j * i^j mod p with uniform coefficients.  Any
k distinct positions then have exactly uniform joint law on [0, p)^k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX_A = 0xBF58476D1CE4E5B9
_MIX_B = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a fixed bijective mixing of a 64-bit word."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * _MIX_A) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX_B) & _MASK64
    return z ^ (z >> 31)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = z.astype(np.uint64, copy=True)
        z ^= z >> np.uint64(30)
        z *= np.uint64(_MIX_A)
        z ^= z >> np.uint64(27)
        z *= np.uint64(_MIX_B)
        z ^= z >> np.uint64(31)
    return z


@dataclass(frozen=True)
class Seed:
    """64-bit unsigned seed.  Equal seeds reproduce bit-identical streams."""

    value: int

    def __post_init__(self) -> None:
        if not 0 <= self.value <= _MASK64:
            raise ValueError(f"seed must fit in 64 bits, got {self.value}")

    @classmethod
    def parse(cls, text: str) -> "Seed":
        """Accept a decimal or 0x-prefixed hex string."""
        text = text.strip()
        if text.lower().startswith("0x"):
            return cls(int(text, 16))
        return cls(int(text, 10))

    def derive(self, *tags: int) -> "Seed":
        """Deterministic child seed; distinct tag tuples give distinct streams."""
        acc = self.value
        for tag in tags:
            acc = mix64(acc ^ mix64((tag & _MASK64) ^ _GOLDEN))
        return Seed(acc)


def as_seed(seed: "Seed | int | str") -> Seed:
    if isinstance(seed, Seed):
        return seed
    if isinstance(seed, str):
        return Seed.parse(seed)
    return Seed(int(seed) & _MASK64)


class Stream:
    """SplitMix64 output stream with an explicit position counter.

    Sampling never mutates shared state: the value at position i is
    mix64(base + (i+1)*GOLDEN), so streams can be split by position.
    """

    def __init__(self, seed: "Seed | int | str"):
        self._base = as_seed(seed).value
        self._pos = 0

    @property
    def position(self) -> int:
        return self._pos

    def u64_at(self, i: int) -> int:
        return mix64((self._base + ((i + 1) * _GOLDEN)) & _MASK64)

    def next_u64(self) -> int:
        v = self.u64_at(self._pos)
        self._pos += 1
        return v

    def next_below(self, bound: int, strict: bool = False) -> int:
        """Uniform-ish draw in [0, bound).

        Default accepts the modulo bias (at most bound/2^64).  Strict mode
        rejects-and-resamples deterministically from the stream, giving an
        exactly uniform value.
        """
        if bound <= 0:
            raise ValueError("bound must be positive")
        if not strict:
            return self.next_u64() % bound
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            v = self.next_u64()
            if v < limit:
                return v % bound

    def u64_block(self, count: int) -> np.ndarray:
        """Next `count` values as a uint64 array (advances the counter)."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        idx = np.arange(self._pos + 1, self._pos + count + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            state = idx * np.uint64(_GOLDEN) + np.uint64(self._base)
        self._pos += count
        return _mix64_np(state)

    def next_floats(self, count: int) -> np.ndarray:
        """`count` doubles uniform in (0, 1), derived from u64s."""
        block = self.u64_block(count)
        return (block.astype(np.float64) + 1.0) / 18446744073709551616.0

    def next_normals(self, count: int) -> np.ndarray:
        """Standard normal variates via a deterministic Box-Muller transform."""
        pairs = (count + 1) // 2
        u1 = self.next_floats(pairs)
        u2 = self.next_floats(pairs)
        r = np.sqrt(-2.0 * np.log(u1))
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = r * np.cos(2.0 * math.pi * u2)
        out[1::2] = r * np.sin(2.0 * math.pi * u2)
        return out[:count]


# ---------------------------------------------------------------------------
# primality (deterministic Miller-Rabin, valid for 64-bit inputs)

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def next_prime_at_least(n: int) -> int:
    n = max(n, 2)
    while not is_prime(n):
        n += 1
    return n


# ---------------------------------------------------------------------------
# k-wise independent generators


class InvalidRangeError(ValueError):
    """Requested reduction range exceeds the generator's field size."""


@dataclass(frozen=True)
class KWiseGenerator:
    """Degree-(k-1) polynomial over F_prime, indexable on [0, domain).

    Immutable after construction; value_at takes explicit positions, so a
    generator can be shared read-only across threads.
    """

    prime: int
    k: int
    coeffs: tuple[int, ...]
    domain: int

    def value_at(self, i: int) -> int:
        acc = 0
        for c in reversed(self.coeffs):
            acc = (acc * i + c) % self.prime
        return acc

    def values(self, count: int) -> list[int]:
        return [self.value_at(i) for i in range(count)]

    def values_np(self, count: int) -> np.ndarray:
        """Vectorized value_at(0..count-1); requires prime < 2^31."""
        if self.prime >= (1 << 31):
            return np.array(self.values(count), dtype=np.int64)
        idx = np.arange(count, dtype=np.int64)
        acc = np.zeros(count, dtype=np.int64)
        for c in reversed(self.coeffs):
            acc = (acc * idx + c) % self.prime
        return acc


def new_kwise(
    k: int,
    domain: int,
    seed: "Seed | int | str",
    low_bias_range: int | None = None,
    strict: bool = False,
) -> KWiseGenerator:
    """Build a k-wise generator over the smallest prime p >= domain.

    Consumes exactly k field elements from the seeded stream, so the true
    random-bit cost is k*ceil(log2 p).  When `low_bias_range` is given, p
    is raised to at least low_bias_range^2 so that the modulo bias of
    kwise_indices at that range is below 1/low_bias_range.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if domain < 1:
        raise ValueError("domain must be >= 1")
    target = max(domain, 2)
    if low_bias_range is not None:
        target = max(target, low_bias_range * low_bias_range)
    p = next_prime_at_least(target)
    st = Stream(seed)
    coeffs = tuple(st.next_below(p, strict=strict) for _ in range(k))
    return KWiseGenerator(prime=p, k=k, coeffs=coeffs, domain=domain)


def kwise_indices(gen: KWiseGenerator, count: int, range_: int) -> list[int]:
    """g(0..count-1) reduced into [0, range_) by g(i) mod range_.

    The modulo bias (at most range_/prime per position) is accepted;
    construct the generator with low_bias_range to control it.
    """
    if count < 0 or count > gen.domain:
        raise ValueError(f"count must be in [0, {gen.domain}]")
    if range_ < 1 or range_ > gen.prime:
        raise InvalidRangeError(f"range {range_} exceeds field size {gen.prime}")
    return [v % range_ for v in gen.values(count)]


def kwise_indices_np(gen: KWiseGenerator, count: int, range_: int) -> np.ndarray:
    if count < 0 or count > gen.domain:
        raise ValueError(f"count must be in [0, {gen.domain}]")
    if range_ < 1 or range_ > gen.prime:
        raise InvalidRangeError(f"range {range_} exceeds field size {gen.prime}")
    return gen.values_np(count) % range_


def random_bit_budget(gen: KWiseGenerator) -> int:
    """True random bits consumed by the generator: k * ceil(log2 prime)."""
    return gen.k * ((gen.prime - 1).bit_length())


# ---------------------------------------------------------------------------
# batched replicas of the scalar paths above.  These exist so the search
# pipelines can draw per-block randomness for hundreds of blocks in a few
# numpy passes while reproducing Seed.derive/new_kwise bit for bit; the
# equivalence is unit-tested.


def derive_array(values: np.ndarray, *tags: int) -> np.ndarray:
    """Vectorized Seed.derive over an array of seed values."""
    acc = values.astype(np.uint64, copy=True)
    for tag in tags:
        acc = _mix64_np(acc ^ np.uint64(mix64((tag & _MASK64) ^ _GOLDEN)))
    return acc


def derive_tagged(values: np.ndarray, tags: np.ndarray) -> np.ndarray:
    """Vectorized Seed.derive with a per-row final tag."""
    with np.errstate(over="ignore"):
        inner = _mix64_np(tags.astype(np.uint64) ^ np.uint64(_GOLDEN))
    return _mix64_np(values.astype(np.uint64) ^ inner)


def kwise_coeffs_batch(seed_values: np.ndarray, k: int, p: int) -> np.ndarray:
    """Row i equals new_kwise(k, ., Seed(seed_values[i])).coeffs (biased mode)."""
    n = len(seed_values)
    out = np.empty((n, k), dtype=np.int64)
    base = seed_values.astype(np.uint64)
    with np.errstate(over="ignore"):
        for j in range(k):
            state = base + np.uint64(((j + 1) * _GOLDEN) & _MASK64)
            out[:, j] = (_mix64_np(state) % np.uint64(p)).astype(np.int64)
    return out


def kwise_indices_batch(coeffs: np.ndarray, p: int, count: int, range_: int) -> np.ndarray:
    """Row-wise kwise_indices for a batch of coefficient vectors; p < 2^31."""
    if p >= (1 << 31):
        raise ValueError("batch path requires prime < 2^31")
    n, k = coeffs.shape
    idx = np.arange(count, dtype=np.int64)
    acc = np.zeros((n, count), dtype=np.int64)
    for j in range(k - 1, -1, -1):
        acc = (acc * idx + coeffs[:, j : j + 1]) % p
    return acc % range_
