"""Offline exact and approximate nearest/farthest neighbor search.

The decision core follows the group-evaluation recipe: blue points are
partitioned into groups, each group/query pair gets the value of an
OR-of-thresholds aggregate (one polynomial block per blue point), and a
fired decision means the aggregate cleared its 2s band separator.

Two evaluation routes compute the identical aggregate values:

* the literal route expands block polynomials through the symmetric and
  agreement substitutions and runs split_features + matmul; its feature
  width grows like sum_j C(d,j) 3^j, so it is reserved for small d
  (deterministic mode) and for the fidelity tests;
* the production route evaluates the same polynomials through agreement
  counts (one matrix product per recursion level of the inner gates) and
  exact scaled value tables, with a guarded float accumulation whose
  ambiguous pairs fall back to exact integer arithmetic.

Their equality on common inputs is property-tested; every report is
re-verified against true distances before it is returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .multilinear import matmul, pair_monomial_count_bound, split_features, hamming_agreement_substitute, expand_symmetric
from .points import (
    BinaryPointSet,
    IntegerPointSet,
    NeighborReport,
    NeighborRow,
    hamming_distance_matrix,
)
from .prob_ptf import _TAG_BLOCK, _TAG_INNER, _TAG_R, sample_prob_ptf
from .prob_threshold import _TAG_LEVEL, window_poly
from .randomness import (
    Seed,
    Stream,
    as_seed,
    derive_array,
    derive_tagged,
    kwise_coeffs_batch,
    kwise_indices_batch,
)
from .univariate import UnivariatePoly, as_fraction, ptf_threshold, to_binomial_basis

_TAG_DECIDE = 0xDEC1
_TAG_EMBED = 0xE3BD
_TAG_JL = 0x17A0

_FLOAT_SLACK = 2.0**-48
_STRICT_WIDTH_LIMIT = 200_000


def default_group_size(n_blue: int) -> int:
    return max(2, int(n_blue**0.25))


# ---------------------------------------------------------------------------
# scaled value tables


_TABLE_CACHE: dict[tuple, tuple[list[int], int, np.ndarray]] = {}


def _scaled_table(poly: UnivariatePoly, shift: int, top: int, key: tuple):
    """Values poly(y - shift) for y in 0..top as (numerators, denominator, floats).

    Numerators come from an integer Horner over the denominator-cleared
    coefficients, so the floats are correctly rounded views of exact values
    (a float Horner would cancel catastrophically at these magnitudes).
    """
    cached = _TABLE_CACHE.get(key)
    if cached is not None:
        return cached
    den = math.lcm(*(c.denominator for c in poly.coeffs)) if poly.coeffs else 1
    nums = [int(c * den) for c in poly.coeffs]
    outs: list[int] = []
    for y in range(top + 1):
        x = y - shift
        acc = 0
        for c in reversed(nums):
            acc = acc * x + c
        outs.append(acc)
    floats = np.array([float(Fraction(v, den)) for v in outs], dtype=np.float64)
    result = (outs, den, floats)
    _TABLE_CACHE[key] = result
    return result


# ---------------------------------------------------------------------------
# batched construction of per-block probabilistic PTFs


@dataclass
class _BlockBatch:
    """Per-(decision, repetition) sampled parameters for every blue block."""

    template: object            # ProbPtfSample of block 0 (shared parameters)
    R: np.ndarray               # (n_blocks, r) sampled positions into [0, d)
    level_maps: list[np.ndarray]  # inner level index maps, (n_blocks, m_next)
    block_seeds: np.ndarray     # uint64 per-block seeds (for exact fallback)


def _batch_blocks(d: int, amp: float, t_param: int, eps_param: Fraction,
                  decide_seed: Seed, n_blocks: int, c0: float) -> _BlockBatch:
    template = sample_prob_ptf(d, amp, t_param, eps_param, decide_seed.derive(_TAG_BLOCK, 0), c0=c0)
    base = np.full(n_blocks, decide_seed.value, dtype=np.uint64)
    block_seeds = derive_tagged(derive_array(base, _TAG_BLOCK), np.arange(n_blocks, dtype=np.uint64))
    r = template.r
    if r == d:
        R = np.tile(np.arange(d, dtype=np.int64), (n_blocks, 1))
    else:
        # replicate the scalar draw: gen = new_kwise(k_r, domain=d, seed.derive(_TAG_R))
        from .prob_ptf import _KWISE_SCALE

        k_r = max(1, math.floor(_KWISE_SCALE * math.log(8.0 * amp)))
        p = _prime_for(d)
        coeffs = kwise_coeffs_batch(derive_array(block_seeds, _TAG_R), k_r, p)
        R = kwise_indices_batch(coeffs, p, r, d)
    level_maps = []
    inner_seeds = derive_array(block_seeds, _TAG_INNER)
    for j, lv in enumerate(template.inner.levels):
        gen_seeds = derive_array(inner_seeds, _TAG_LEVEL, j + 1)
        coeffs = kwise_coeffs_batch(gen_seeds, lv.k, lv.prime)
        level_maps.append(kwise_indices_batch(coeffs, lv.prime, lv.m_next, lv.m))
    return _BlockBatch(template=template, R=R, level_maps=level_maps, block_seeds=block_seeds)


def _prime_for(domain: int) -> int:
    from .randomness import next_prime_at_least

    return next_prime_at_least(max(domain, 2))


# ---------------------------------------------------------------------------
# gate evaluation (inner sampled threshold polynomials, batched)


def _level_counts(batch: _BlockBatch, pbits: np.ndarray, qsigns: np.ndarray) -> list[np.ndarray]:
    """Per-level agreement counts y_l[i, q] between block point i and query q.

    Counts are weighted agreement sums at the sampled (multiset) positions;
    each level is one float32 product, exact because all partial sums stay
    far below 2^24.
    """
    n_blocks, d = pbits.shape
    psigns = (2.0 * pbits.astype(np.float32) - 1.0)
    counts = []
    pos = batch.R
    while True:
        m = pos.shape[1]
        weights = np.zeros((n_blocks, d), dtype=np.float32)
        np.add.at(weights, (np.repeat(np.arange(n_blocks), m), pos.ravel()), 1.0)
        raw = (weights * psigns) @ qsigns.T
        counts.append(np.rint((m + raw) / 2.0).astype(np.int64))
        if len(counts) > len(batch.level_maps):
            break
        pos = np.take_along_axis(pos, batch.level_maps[len(counts) - 1], axis=1)
    return counts


def _gate_values(batch: _BlockBatch, counts: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Values (int8) and dirty mask of the inner gates for all (block, query).

    Window polynomials agree with the threshold indicator inside their
    window (a tested exactness invariant), so in-window evaluations reduce
    to integer comparisons; coordinates that would need an out-of-window
    window value, or a selector outside {0,1}, are marked dirty and get an
    honest scalar re-evaluation by the caller.
    """
    inner = batch.template.inner
    levels = inner.levels
    memo: dict = {}

    def thr_int(theta: Fraction, m: int) -> int:
        # [count >= theta*m] for integer counts equals [count >= ceil(theta*m)]
        num, den = (theta * m).numerator, (theta * m).denominator
        return -((-num) // den)

    def value(level: int, theta: Fraction):
        key = (level, theta)
        if key in memo:
            return memo[key]
        y = counts[level]
        if level == len(levels):
            vals = (y >= thr_int(theta, inner.base_arity)).astype(np.int8)
            dirty = np.zeros(vals.shape, dtype=bool)
        else:
            lv = levels[level]
            vm, dm = value(level + 1, theta)
            vp, dp = value(level + 1, theta + lv.delta)
            vn, dn = value(level + 1, theta - lv.delta)
            sel = (1 - vp) * vn
            w = window_poly(lv.m, theta, 2.0 * lv.a)
            ind = (y >= thr_int(theta, lv.m)).astype(np.int8)
            in_win = (y >= w.lo) & (y <= w.hi)
            sel_one = sel == 1
            vals = np.where(sel_one, ind, vm)
            dirty = np.where(
                sel_one,
                dp | dn | ~in_win,
                np.where(sel == 0, dp | dn | dm, True),
            )
        memo[key] = (vals, dirty)
        return memo[key]

    return value(0, inner.theta)


def _exact_gate(batch: _BlockBatch, block: int, pbits_row: np.ndarray, qbits_row: np.ndarray,
                d: int, amp: float, t_param: int, eps_param: Fraction, c0: float) -> int:
    """Honest scalar gate evaluation for a dirty coordinate."""
    from .prob_ptf import sample_prob_ptf as _sp
    from .prob_threshold import eval_sampled

    sample = _sp(d, amp, t_param, eps_param, Seed(int(batch.block_seeds[block])), c0=c0)
    z = (pbits_row == qbits_row).astype(np.uint8)
    return eval_sampled(sample.inner, z[np.array(sample.R, dtype=np.intp)])


# ---------------------------------------------------------------------------
# one decision (fixed threshold, one repetition)


def _decide_once(
    pbits: np.ndarray,
    qbits: np.ndarray,
    agree_full: np.ndarray,
    group_starts: np.ndarray,
    mode: str,
    t_param: int,
    eps_param: Fraction,
    s_group: int,
    decide_seed: Seed,
    c0: float,
) -> np.ndarray:
    """Fired matrix (n_groups, n_red) for one aggregate evaluation."""
    n_blocks, d = pbits.shape
    amp = 3.0 * s_group
    low_sep = s_group          # |F| <= s when the OR is false
    fire_sep = 2 * s_group     # F > 2s when a block clears its margin

    if mode == "det":
        poly, shift = _det_block_poly(amp, t_param, eps_param)
        nums, den, floats = _scaled_table(
            poly, shift, d, ("det", d, int(amp), t_param, eps_param, shift)
        )
        gate_f = np.ones((n_blocks, qbits.shape[0]), dtype=np.float64)
        dirty = np.zeros_like(gate_f, dtype=bool)
        gates_exact: dict = {}
    else:
        batch = _batch_blocks(d, amp, t_param, eps_param, decide_seed, n_blocks, c0)
        counts = _level_counts(batch, pbits, (2.0 * qbits.astype(np.float32) - 1.0))
        gates, dirty = _gate_values(batch, counts)
        gates_exact = {}
        if dirty.any():
            for bi, qi in zip(*np.nonzero(dirty)):
                gates_exact[(int(bi), int(qi))] = _exact_gate(
                    batch, int(bi), pbits[bi], qbits[qi], d, amp, t_param, eps_param, c0
                )
        gate_f = gates.astype(np.float64)
        tmpl = batch.template
        nums, den, floats = _scaled_table(
            tmpl.outer,
            tmpl.t_minus,
            d,
            ("prob", d, int(amp), t_param, eps_param, tmpl.t_minus, c0),
        )

    tab_f = floats[agree_full]
    terms = gate_f * tab_f
    terms[dirty] = 0.0
    f_hat = np.add.reduceat(terms, group_starts, axis=0)
    err = np.add.reduceat(np.abs(terms), group_starts, axis=0) * _FLOAT_SLACK + _FLOAT_SLACK
    dirty_group = np.add.reduceat(dirty.astype(np.int32), group_starts, axis=0) > 0

    fired = f_hat > fire_sep + err
    not_fired = f_hat <= fire_sep - err
    ambiguous = (~fired & ~not_fired) | dirty_group
    if ambiguous.any():
        n_groups = len(group_starts)
        bounds = list(group_starts) + [n_blocks]
        for gi, qi in zip(*np.nonzero(ambiguous)):
            total = 0
            for bi in range(bounds[gi], bounds[gi + 1]):
                g = gates_exact.get((bi, int(qi)))
                if g is None:
                    g = 1 if mode == "det" else int(gate_f[bi, qi])
                if g:
                    total += g * nums[agree_full[bi, qi]]
            fired[gi, qi] = total > fire_sep * den
    return fired


def _det_block_poly(amp: float, t_param: int, eps_param: Fraction):
    """Deterministic block polynomial for agreement threshold [y > t_param].

    t_param >= 1 uses the three-band PTF; t_param == 0 uses the linear
    polynomial 1 + (amp-1) y, which satisfies the same contract exactly.
    Returns (poly, argument shift).
    """
    if t_param == 0:
        return UnivariatePoly.from_coeffs([1, int(amp) - 1]), 0
    return ptf_threshold(amp, t_param, eps_param), 0


def _decide_majority(
    pbits, qbits, agree_full, group_starts, mode, t_param, eps_param, s_group, seed, reps, t_key, c0
) -> np.ndarray:
    votes = np.zeros((len(group_starts), qbits.shape[0]), dtype=np.int32)
    for rep in range(reps):
        decide_seed = seed.derive(_TAG_DECIDE, t_key, rep)
        votes += _decide_once(
            pbits, qbits, agree_full, group_starts, mode, t_param, eps_param, s_group, decide_seed, c0
        )
        if mode == "det":
            return votes > 0  # deterministic: one evaluation decides
    return 2 * votes > reps


# ---------------------------------------------------------------------------
# public Hamming decision + offline search


def _band_params(d: int, t: int, mode: str, eps) -> tuple[int, Fraction] | None:
    """Agreement-space (t_param, eps_param) for distance threshold t, or None
    when the decision is trivially true (t >= d)."""
    if mode in ("exact", "det"):
        big_t = d - t - 1
        if big_t < 0:
            return None
        if mode == "det":
            return big_t, Fraction(1, max(big_t, 1))
        return big_t, Fraction(1, d)
    eps = as_fraction(eps)
    t_high = min(d, t + max(1, math.ceil(eps * d)))
    if t_high <= t:
        return None
    t_param = d - t_high
    if t_param < 0:
        return None
    return t_param, Fraction(t_high - t, d)


def hamming_decide(
    red: BinaryPointSet,
    blue: BinaryPointSet,
    t: int,
    s: int | None = None,
    mode: str = "exact",
    eps=None,
    seed: "Seed | int | str" = 0,
    reps: int | None = None,
    pipeline: str = "auto",
) -> list[bool]:
    """Per red point: does some blue point lie within Hamming distance t?

    mode 'exact' uses probabilistic exact-setting blocks, 'approx' allows
    an additive eps*d band (fires for distance <= t, may stay silent until
    t + eps*d), 'det' is deterministic and consumes no randomness.
    """
    if red.d != blue.d:
        raise ValueError("dimension mismatch")
    if not 0 <= t <= red.d:
        raise ValueError("t must lie in [0, d]")
    fires, _ = _decide_groups(red, blue, t, s, mode, eps, seed, reps, pipeline)
    if fires is None:
        return [True] * red.count
    return fires.any(axis=0).tolist()


def _decide_groups(red, blue, t, s, mode, eps, seed, reps, pipeline="auto"):
    d = red.d
    s_group = min(blue.count, s or default_group_size(blue.count))
    seed = as_seed(seed)
    if reps is None:
        reps = 1 if mode == "det" else math.ceil(math.log2(max(2, red.count))) + 2
    params = _band_params(d, t, mode, eps)
    if params is None:
        return None, None
    t_param, eps_param = params
    group_starts = np.arange(0, blue.count, s_group)

    if pipeline == "strict" or (
        pipeline == "auto"
        and mode == "det"
        and d <= 10
        and pair_monomial_count_bound(d, _det_block_poly(3.0 * s_group, t_param, eps_param)[0].degree)
        <= _STRICT_WIDTH_LIMIT // 4
    ):
        if mode != "det":
            raise ValueError("the literal split-features pipeline supports mode='det'")
        fires = _decide_det_strict(red, blue, t_param, eps_param, s_group, group_starts)
        return fires, group_starts

    pbits = blue.bits()
    qbits = red.bits()
    agree_full = (d - hamming_distance_matrix(blue, red)).astype(np.int64)
    fires = _decide_majority(
        pbits, qbits, agree_full, group_starts, "det" if mode == "det" else "prob",
        t_param, eps_param, s_group, seed, reps, t, 2.0,
    )
    return fires, group_starts


def _decide_det_strict(red, blue, t_param, eps_param, s_group, group_starts) -> np.ndarray:
    """Literal pipeline: expand, substitute, split, multiply, threshold."""
    d = red.d
    poly, _ = _det_block_poly(3.0 * s_group, t_param, eps_param)
    width = pair_monomial_count_bound(d, poly.degree)
    if width > _STRICT_WIDTH_LIMIT:
        raise ValueError(f"feature width {width} too large for the literal pipeline")
    binb = to_binomial_basis(poly)
    if binb.degree > d:
        # C(y, j) vanishes on 0 <= y < j, so dropping basis elements beyond
        # degree d restricts the polynomial to the cube without changing it
        # at any evaluated point.
        from .univariate import BinomialBasisPoly

        binb = BinomialBasisPoly.from_coeffs(binb.coeffs[: d + 1])
    agreement = expand_symmetric(binb, tuple(range(d)))
    pairpoly = hamming_agreement_substitute(agreement, d)
    pb = blue.bits()
    groups = [
        [pb[i] for i in range(start, min(start + s_group, blue.count))]
        for start in group_starts
    ]
    pair = split_features(pairpoly, groups, list(red.bits()), d=d)
    prod = matmul(pair.phi, pair.psi, backend="numpy")
    fire_sep = 2 * s_group * pair.scale
    return np.array([[v > fire_sep for v in row] for row in prod], dtype=bool)


def offline_hamming_nn(
    red: BinaryPointSet,
    blue: BinaryPointSet,
    farthest: bool = False,
    mode: str = "exact",
    s: int | None = None,
    seed: "Seed | int | str" = 0,
    reps: int | None = None,
    eps=None,
    threads: int = 1,
) -> NeighborReport:
    """Nearest (or farthest) blue neighbor for every red point.

    Sweeps the decision for t = 0..d, takes the monotone closure of each
    red point's fire sequence, scans the witnessing group at the minimal
    satisfying threshold, and reports re-verified true distances.  The
    per-t decisions are independent pure functions of (inputs, seed, t),
    so the result is identical at any worker count.
    """
    if red.count < 1 or blue.count < 1:
        raise ValueError("point sets must be nonempty")
    seed = as_seed(seed)
    work_blue = blue.complement() if farthest else blue
    d = red.d
    s_group = min(blue.count, s or default_group_size(blue.count))
    if reps is None:
        reps = 1 if mode == "det" else math.ceil(math.log2(max(2, red.count))) + 2

    def decide_at(t: int):
        return _decide_groups(red, work_blue, t, s_group, mode, eps, seed, reps)[0]

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_t = list(pool.map(decide_at, range(d + 1)))
    else:
        per_t = [decide_at(t) for t in range(d + 1)]
    group_starts = np.arange(0, blue.count, s_group)
    n_groups = len(group_starts)
    bounds = list(group_starts) + [blue.count]

    any_t = np.zeros((d + 1, red.count), dtype=bool)
    for t in range(d + 1):
        any_t[t] = True if per_t[t] is None else per_t[t].any(axis=0)

    rows = []
    violations = 0
    fallbacks = 0
    dist_true = hamming_distance_matrix(red, blue)
    for qi in range(red.count):
        col = any_t[:, qi]
        suffix_true = d + 1
        for t in range(d, -1, -1):
            if col[t]:
                suffix_true = t
            else:
                break
        violations += int(col[:suffix_true].sum())
        t_star = suffix_true
        blue_idx = None
        for t_w in range(min(t_star, d), d + 1):
            fires = per_t[t_w]
            gi = None
            if fires is None:
                gi = 0 if n_groups else None
                cand = range(blue.count)
            else:
                hit = np.nonzero(fires[:, qi])[0]
                if hit.size == 0:
                    continue
                gi = int(hit[0])
                cand = range(bounds[gi], bounds[gi + 1])
            row_d = dist_true[qi]
            if farthest:
                blue_idx = max(cand, key=lambda j: (row_d[j], -j))
            else:
                blue_idx = min(cand, key=lambda j: (row_d[j], j))
            break
        if blue_idx is None:
            fallbacks += 1
            row_d = dist_true[qi]
            pick = np.argmax(row_d) if farthest else np.argmin(row_d)
            blue_idx = int(pick)
        tag = "exact" if mode in ("exact", "det") else "additive-eps"
        rows.append(NeighborRow(qi, int(blue_idx), int(dist_true[qi, blue_idx]), tag))

    meta = {
        "algorithm": "offline-hamming-nn",
        "mode": mode,
        "farthest": farthest,
        "seed": seed.value,
        "reps": reps,
        "group_size": s_group,
        "eps": None if eps is None else str(as_fraction(eps)),
        "raw_monotone_violations": int(violations),
        "fallbacks": fallbacks,
        "degree": _decision_degree(d, s_group, mode, eps),
        "failure_note": "per-pair aggregate error <= 1/3 before majority voting",
    }
    return NeighborReport(rows=tuple(rows), metadata=meta)


def _decision_degree(d, s_group, mode, eps):
    params = _band_params(d, max(0, d // 2), mode, eps)
    if params is None:
        return 0
    t_param, eps_param = params
    if mode == "det":
        return _det_block_poly(3.0 * s_group, t_param, eps_param)[0].degree
    tmpl = sample_prob_ptf(d, 3.0 * s_group, t_param, eps_param, Seed(0))
    return tmpl.degree


# ---------------------------------------------------------------------------
# dimension reduction: l1 -> Hamming, l2 -> l1


class DegenerateThresholdError(ValueError):
    """l1 hashing needs a positive distance threshold."""


@dataclass(frozen=True)
class L1HammingEmbedding:
    """k-bit fingerprints of integer points, calibrated for one threshold t.

    Pairs with ||p-q||_1 <= t land below a0 and pairs with distance
    >= (1+eps) t land above a1, each with high probability; a1 - a0 is a
    constant fraction of (alpha1 - alpha0) k, the additive band the
    Hamming core decides over.
    """

    points: BinaryPointSet
    k: int
    t: int
    a0: int
    a1: int
    alpha0: float
    alpha1: float


def _hash_alphas(d: int, eps: float) -> tuple[float, float, float]:
    alpha0 = 0.5 * (1.0 - (1.0 - 1.0 / (2 * d)) ** d)
    alpha1 = 0.5 * (1.0 - (1.0 - min(1.0, (1.0 + eps) / (2 * d))) ** d)
    return alpha0, alpha1, alpha1 - alpha0


def default_fingerprint_bits(n: int, d: int, eps: float) -> int:
    """Default k: C (1/eps)^2 log n with C = 2, floored so the near-pair
    margin is at least 3.1 binomial sigmas (the floor usually dominates)."""
    _, _, gap = _hash_alphas(d, eps)
    base = math.ceil(2.0 * (1.0 / eps) ** 2 * math.log(max(n, 2)))
    floor = math.ceil((2.067 / gap) ** 2)
    return max(base, floor, math.ceil(math.log(max(n, 2))), 8)


def l1_to_hamming(
    points: IntegerPointSet,
    t: int,
    eps: float,
    k: int | None = None,
    seed: "Seed | int | str" = 0,
) -> L1HammingEmbedding:
    """Coordinate-sampling l1 hash into k Hamming bits.

    Each fingerprint bit mixes d bucket hashes floor((p_a + b) / 2t) with a
    uniformly chosen coordinate a and uniform integer offset b in [0, 2t).
    """
    if t < 1:
        raise DegenerateThresholdError("threshold t must be >= 1")
    n, d = points.count, points.d
    if k is None:
        k = default_fingerprint_bits(n, d, eps)
    alpha0, alpha1, gap = _hash_alphas(d, eps)
    st = Stream(as_seed(seed))
    salts = st.u64_block(k)
    a_idx = (st.u64_block(k * d) % np.uint64(d)).astype(np.int64).reshape(d, k)
    b_off = (st.u64_block(k * d) % np.uint64(2 * t)).astype(np.int64).reshape(d, k)
    bits = _fingerprint_bits(points.coords, a_idx, b_off, 2 * t, salts)
    # near-side margin gets 75% of the gap (it carries the correctness
    # burden; spurious far-side fires are caught by verified scans)
    a0 = math.floor(alpha0 * k + 0.75 * gap * k)
    a1 = math.ceil(alpha1 * k - 0.05 * gap * k)
    a1 = max(a1, a0 + 2)
    if a1 > k:
        raise ValueError("fingerprint bands exceed k; raise k")
    return L1HammingEmbedding(
        points=BinaryPointSet.from_bits(bits), k=k, t=t, a0=a0, a1=a1,
        alpha0=alpha0, alpha1=alpha1,
    )


def _np_mix(z: np.ndarray) -> np.ndarray:
    from .randomness import _mix64_np

    return _mix64_np(z)


def _fingerprint_numpy(coords, a_idx, b_off, twot, salts) -> np.ndarray:
    n = coords.shape[0]
    acc = np.tile(salts, (n, 1))
    with np.errstate(over="ignore"):
        for j in range(a_idx.shape[0]):
            h = (coords[:, a_idx[j]] + b_off[j]) // twot
            acc = acc ^ (h.astype(np.uint64) + np.uint64(2 * j + 1))
            acc = _np_mix(acc)
    return (acc >> np.uint64(63)).astype(np.uint8)


try:  # compiled kernel for the hot fingerprint fold; numpy path is identical
    import numba as _numba

    @_numba.njit(cache=True, parallel=True)
    def _fingerprint_numba(coords, a_idx, b_off, twot, salts, out):  # pragma: no cover
        n, k = out.shape
        d = a_idx.shape[0]
        for i in _numba.prange(n):
            for col in range(k):
                acc = salts[col]
                for j in range(d):
                    h = (coords[i, a_idx[j, col]] + b_off[j, col]) // twot
                    acc = acc ^ (np.uint64(h) + np.uint64(2 * j + 1))
                    acc = (acc ^ (acc >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
                    acc = (acc ^ (acc >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
                    acc = acc ^ (acc >> np.uint64(31))
                out[i, col] = acc >> np.uint64(63)

    _HAVE_NUMBA = True
except Exception:  # pragma: no cover
    _HAVE_NUMBA = False


def _fingerprint_bits(coords, a_idx, b_off, twot, salts) -> np.ndarray:
    n, k = coords.shape[0], a_idx.shape[1]
    if _HAVE_NUMBA and n * k * a_idx.shape[0] >= 1_000_000:
        out = np.empty((n, k), dtype=np.uint8)
        _fingerprint_numba(
            np.ascontiguousarray(coords), np.ascontiguousarray(a_idx),
            np.ascontiguousarray(b_off), twot, salts, out,
        )
        return out
    return _fingerprint_numpy(coords, a_idx, b_off, twot, salts)


@dataclass(frozen=True)
class L2Embedding:
    points: IntegerPointSet
    l1_scale: float  # expected embedded-l1 distance per unit l2 distance
    k: int


def l2_to_l1(
    points: IntegerPointSet,
    eps: float,
    k: int | None = None,
    seed: "Seed | int | str" = 0,
    quant: int = 8,
) -> L2Embedding:
    """Gaussian projection into k coordinates, quantized to integers.

    The l1 distance between images approximates k sqrt(2/pi) times the l2
    distance within 1 +/- O(eps); coordinates keep O(log U) bits via the
    fixed quantization step 1/quant.
    """
    n = points.count
    if k is None:
        k = max(64, math.ceil((1.0 / eps) ** 2 * math.log(max(n, 2))))
    normals = Stream(as_seed(seed)).next_normals(k * points.d).reshape(k, points.d)
    projected = points.coords.astype(np.float64) @ normals.T
    q = np.rint(projected * quant).astype(np.int64)
    q -= q.min() if q.size else 0
    upper = int(q.max()) + 1 if q.size else 1
    return L2Embedding(
        points=IntegerPointSet(d=k, U=upper, coords=q),
        l1_scale=k * math.sqrt(2.0 / math.pi) * quant,
        k=k,
    )


# ---------------------------------------------------------------------------
# threshold decisions on integer points (shared by approx_nn and approx_mst)


def _embedded_decide_votes(
    red_pts: IntegerPointSet,
    blue_pts: IntegerPointSet,
    t_hash: int,
    eps: float,
    s_group: int,
    group_starts: np.ndarray,
    seed: Seed,
    rung_key: int,
    reps: int,
    mirror_far: bool,
    fingerprint_bits: int | None = None,
) -> np.ndarray:
    """Majority-fired matrix (n_groups, n_red) for one distance threshold.

    Each repetition draws a fresh fingerprint embedding of all points and
    runs the additive Hamming core on it.  In mirror mode the red images
    are complemented, turning the far-side band into a near-side one.
    """
    n_blue = blue_pts.count
    stacked = IntegerPointSet(
        d=red_pts.d,
        U=max(red_pts.U, blue_pts.U),
        coords=np.vstack([blue_pts.coords, red_pts.coords]),
    )
    votes = np.zeros((len(group_starts), red_pts.count), dtype=np.int32)
    for rep in range(reps):
        emb = l1_to_hamming(stacked, t_hash, eps, k=fingerprint_bits,
                            seed=seed.derive(_TAG_EMBED, rung_key, rep))
        k = emb.k
        blue_e = BinaryPointSet.from_bits(emb.points.bits()[:n_blue])
        red_bits = emb.points.bits()[n_blue:]
        if mirror_far:
            # complementing the red images swaps the two bands
            red_e = BinaryPointSet.from_bits(1 - red_bits)
            t_low, t_high = k - emb.a1, k - emb.a0
        else:
            red_e = BinaryPointSet.from_bits(red_bits)
            t_low, t_high = emb.a0, emb.a1
        t_param = k - t_high
        eps_param = Fraction(t_high - t_low, k)
        pbits = blue_e.bits()
        qbits = red_e.bits()
        agree = (k - hamming_distance_matrix(blue_e, red_e)).astype(np.int64)
        decide_seed = seed.derive(_TAG_DECIDE, rung_key, rep)
        votes += _decide_once(
            pbits, qbits, agree, group_starts, "prob", t_param, eps_param,
            s_group, decide_seed, 2.0,
        )
    return 2 * votes > reps


def _true_distance_row(metric: str, q_coords: np.ndarray, blue_coords: np.ndarray) -> np.ndarray:
    if metric == "l1":
        return np.abs(blue_coords - q_coords).sum(axis=1)
    diff = blue_coords - q_coords
    return (diff * diff).sum(axis=1)  # squared l2


def approx_nn(
    red: IntegerPointSet,
    blue: IntegerPointSet,
    metric: str = "l1",
    eps: float = 0.3,
    farthest: bool = False,
    seed: "Seed | int | str" = 0,
    reps: int = 3,
    s: int | None = None,
) -> NeighborReport:
    """(1+eps)-approximate l1 or l2 nearest/farthest blue neighbors.

    Sweeps thresholds over powers of (1+eps); each rung embeds the points
    (after a Gaussian l2 -> l1 step when metric='l2'), runs the additive
    Hamming core, and scans fired groups.  A candidate is accepted only if
    its re-verified true distance meets the rung value, so a returned
    distance is within the (1+eps) factor whenever the sweep accepted at
    the right rung; failures to accept fall through to later rungs.
    """
    if metric not in ("l1", "l2"):
        raise ValueError("metric must be 'l1' or 'l2'")
    if red.count < 1 or blue.count < 1:
        raise ValueError("point sets must be nonempty")
    if blue.U < 2:
        raise ValueError("coordinate bound U must be >= 2")
    seed = as_seed(seed)
    s_group = min(blue.count, s or default_group_size(blue.count))
    group_starts = np.arange(0, blue.count, s_group)
    bounds = list(group_starts) + [blue.count]
    n_red = red.count

    best: dict[int, tuple[int, float]] = {}
    # rung 0: exact duplicates
    blue_key = {}
    for j, row in enumerate(blue.coords):
        blue_key.setdefault(tuple(row.tolist()), j)
    for i, row in enumerate(red.coords):
        j = blue_key.get(tuple(row.tolist()))
        if j is not None and not farthest:
            best[i] = (j, 0.0)

    max_dist = float(blue.U * red.d) if metric == "l1" else float(blue.U) * math.sqrt(red.d)
    ladder = [1.0]
    while ladder[-1] < max_dist:
        ladder.append(ladder[-1] * (1.0 + eps))
    if farthest:
        ladder = ladder[::-1]

    jl_scale = None
    active = [i for i in range(n_red) if i not in best]
    for rung_key, tau in enumerate(ladder):
        if not active:
            break
        red_act = IntegerPointSet(d=red.d, U=red.U, coords=red.coords[active])
        if metric == "l2":
            stacked = IntegerPointSet(
                d=red.d, U=max(red.U, blue.U),
                coords=np.vstack([blue.coords, red_act.coords]),
            )
            emb2 = l2_to_l1(stacked, eps, seed=seed.derive(_TAG_JL, rung_key))
            jl_scale = emb2.l1_scale
            slack = 1.0 + 3.0 / math.sqrt(emb2.k)
            tau_emb = int(math.ceil(tau * jl_scale * slack + emb2.k))
            blue_dec = IntegerPointSet(d=emb2.points.d, U=emb2.points.U,
                                       coords=emb2.points.coords[: blue.count])
            red_dec = IntegerPointSet(d=emb2.points.d, U=emb2.points.U,
                                      coords=emb2.points.coords[blue.count :])
        else:
            blue_dec, red_dec = blue, red_act
            tau_emb = max(1, int(tau))
        t_hash = max(1, tau_emb)
        fired = _embedded_decide_votes(
            red_dec, blue_dec, t_hash, eps, s_group, group_starts, seed,
            rung_key, reps, mirror_far=farthest,
        )
        still = []
        for pos, qi in enumerate(active):
            hit = np.nonzero(fired[:, pos])[0]
            accepted = False
            drow = _true_distance_row(metric, red.coords[qi], blue.coords)
            goal = tau * tau if metric == "l2" else tau
            for gi in hit:
                cand = range(bounds[gi], bounds[gi + 1])
                if farthest:
                    j = max(cand, key=lambda jj: (drow[jj], -jj))
                    ok = drow[j] >= goal
                else:
                    j = min(cand, key=lambda jj: (drow[jj], jj))
                    ok = drow[j] <= goal
                if ok:
                    dist = math.sqrt(float(drow[j])) if metric == "l2" else float(drow[j])
                    best[qi] = (int(j), dist)
                    accepted = True
                    break
            if not accepted:
                still.append(qi)
        active = still

    fallbacks = 0
    for qi in range(n_red):
        if qi not in best:
            fallbacks += 1
            drow = _true_distance_row(metric, red.coords[qi], blue.coords)
            j = int(np.argmax(drow) if farthest else np.argmin(drow))
            dist = math.sqrt(float(drow[j])) if metric == "l2" else float(drow[j])
            best[qi] = (j, dist)

    rows = tuple(
        NeighborRow(qi, best[qi][0], best[qi][1], f"multiplicative-1+{eps}")
        for qi in range(n_red)
    )
    meta = {
        "algorithm": "approx-nn",
        "metric": metric,
        "eps": eps,
        "farthest": farthest,
        "seed": seed.value,
        "reps": reps,
        "group_size": s_group,
        "ladder_rungs": len(ladder),
        "fallbacks": fallbacks,
        "jl_scale": jl_scale,
    }
    return NeighborReport(rows=rows, metadata=meta)


# ---------------------------------------------------------------------------
# approximate minimum spanning tree


@dataclass(frozen=True)
class MstResult:
    edges: tuple[tuple[int, int, float], ...]
    total_weight: float
    metadata: dict

    def is_spanning_tree(self, n: int) -> bool:
        if len(self.edges) != n - 1:
            return False
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for i, j, _ in self.edges:
            ri, rj = find(i), find(j)
            if ri == rj:
                return False
            parent[ri] = rj
        return True


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[max(ra, rb)] = min(ra, rb)
        return True


def _metric_dist(metric: str, coords: np.ndarray, i: int, j: int) -> float:
    if metric == "l1":
        return float(np.abs(coords[i] - coords[j]).sum())
    diff = coords[i] - coords[j]
    return math.sqrt(float((diff * diff).sum()))


def approx_mst(
    points: IntegerPointSet,
    metric: str = "l1",
    eps: float = 0.25,
    seed: "Seed | int | str" = 0,
    reps: int = 1,
    fingerprint_bits: int = 768,
) -> MstResult:
    """(1+eps)-approximate l1 or l2 minimum spanning tree.

    Kruskal-style outer loop over radii r in powers of (1+eps); at each
    radius, Boruvka-style rounds merge color classes along approximate
    nearest foreign neighbors found through the color-bit red/blue splits,
    with every candidate edge re-verified (accepted only at true distance
    <= r, so each accepted edge is within (1+eps) of the cheapest crossing
    edge of its cut).  Because acceptance is verified, fingerprint noise
    can only defer a merge to the next rung, so a small fingerprint budget
    and a single repetition suffice here.  A final exact completion guards
    the spanning-tree invariant; it does not fire under normal operation.
    """
    if metric not in ("l1", "l2"):
        raise ValueError("metric must be 'l1' or 'l2'")
    n = points.count
    if n < 2:
        raise ValueError("need at least two points")
    seed = as_seed(seed)
    uf = _UnionFind(n)
    edges: list[tuple[int, int, float]] = []

    # radius-0 pass: exact duplicates
    seen: dict[tuple, int] = {}
    for i, row in enumerate(points.coords):
        key = tuple(row.tolist())
        if key in seen:
            if uf.union(seen[key], i):
                edges.append((seen[key], i, 0.0))
        else:
            seen[key] = i

    if metric == "l1":
        max_dist = float(points.U * points.d)
    else:
        max_dist = float(points.U) * math.sqrt(points.d)
    ladder = [1.0]
    while ladder[-1] < max_dist:
        ladder.append(ladder[-1] * (1.0 + eps))

    jl = None
    if metric == "l2":
        jl = l2_to_l1(points, eps, seed=seed.derive(_TAG_JL))

    completion = 0
    for rung_key, r in enumerate(ladder):
        if len(edges) == n - 1:
            break
        active = {uf.find(i) for i in range(n)}
        if len(active) == 1:
            break
        round_no = 0
        while active and len(edges) < n - 1:
            members = [i for i in range(n) if uf.find(i) in active]
            roots = sorted({uf.find(i) for i in members})
            if len(roots) < 2:
                break
            color_id = {root: idx for idx, root in enumerate(roots)}
            nbits = max(1, (len(roots) - 1).bit_length())
            best: dict[int, tuple[float, int]] = {}
            for bit in range(nbits):
                zero_side = [i for i in members if not (color_id[uf.find(i)] >> bit) & 1]
                one_side = [i for i in members if (color_id[uf.find(i)] >> bit) & 1]
                if not zero_side or not one_side:
                    continue
                for red_idx, blue_idx in ((zero_side, one_side), (one_side, zero_side)):
                    cands = _bounded_foreign_candidates(
                        points, jl, metric, red_idx, blue_idx, r, eps, seed,
                        (rung_key, round_no, bit, int(red_idx is one_side)), reps,
                        fingerprint_bits,
                    )
                    for qi, (dist, j) in cands.items():
                        cur = best.get(qi)
                        if cur is None or (dist, j) < cur:
                            best[qi] = (dist, j)
            merged_roots = set()
            for qi in sorted(best):
                dist, j = best[qi]
                ra, rb = uf.find(qi), uf.find(j)
                if ra != rb:
                    uf.union(qi, j)
                    edges.append((qi, j, dist))
                    merged_roots.add(ra)
                    merged_roots.add(rb)
            # classes that merged stay active; untouched colors go inactive
            active = {uf.find(r0) for r0 in merged_roots}
            round_no += 1
            if not merged_roots:
                break

    # exact completion fallback; preserved invariant: output always spans
    while len(edges) < n - 1:
        completion += 1
        roots: dict[int, list[int]] = {}
        for i in range(n):
            roots.setdefault(uf.find(i), []).append(i)
        groups = sorted(roots.values())
        base = groups[0]
        best_pair = None
        for other in groups[1:]:
            for i in base:
                for j in other:
                    dist = _metric_dist(metric, points.coords, i, j)
                    cand = (dist, i, j)
                    if best_pair is None or cand < best_pair:
                        best_pair = cand
        dist, i, j = best_pair
        uf.union(i, j)
        edges.append((i, j, dist))

    total = float(sum(w for _, _, w in edges))
    meta = {
        "algorithm": "approx-mst",
        "metric": metric,
        "eps": eps,
        "seed": seed.value,
        "reps": reps,
        "completion_edges": completion,
        "ladder_rungs": len(ladder),
    }
    return MstResult(edges=tuple(edges), total_weight=total, metadata=meta)


def _bounded_foreign_candidates(
    points, jl, metric, red_idx, blue_idx, r, eps, seed, key_tuple, reps,
    fingerprint_bits=None,
) -> dict[int, tuple[float, int]]:
    """Verified foreign neighbors within radius r for each red index.

    Runs the embedded threshold decision on the red/blue split and scans
    fired groups; only candidates whose true distance is at most r are
    returned, which is all the Boruvka merge logic consumes.
    """
    rung_key = hash(key_tuple) & 0x7FFFFFFF
    if metric == "l2" and jl is not None:
        src = jl.points.coords
        blue_pts = IntegerPointSet(d=jl.points.d, U=jl.points.U, coords=src[blue_idx])
        red_pts = IntegerPointSet(d=jl.points.d, U=jl.points.U, coords=src[red_idx])
        slack = 1.0 + 3.0 / math.sqrt(jl.k)
        t_hash = max(1, int(math.ceil(r * jl.l1_scale * slack + jl.k)))
    else:
        blue_pts = IntegerPointSet(d=points.d, U=points.U, coords=points.coords[blue_idx])
        red_pts = IntegerPointSet(d=points.d, U=points.U, coords=points.coords[red_idx])
        t_hash = max(1, int(r))
    s_group = min(blue_pts.count, default_group_size(blue_pts.count))
    group_starts = np.arange(0, blue_pts.count, s_group)
    bounds = list(group_starts) + [blue_pts.count]
    fired = _embedded_decide_votes(
        red_pts, blue_pts, t_hash, eps, s_group, group_starts, seed, rung_key,
        reps, False, fingerprint_bits,
    )
    out: dict[int, tuple[float, int]] = {}
    for pos, qi in enumerate(red_idx):
        hit = np.nonzero(fired[:, pos])[0]
        for gi in hit:
            for bpos in range(bounds[gi], bounds[gi + 1]):
                j = blue_idx[bpos]
                dist = _metric_dist(metric, points.coords, qi, j)
                if dist <= r:
                    cur = out.get(qi)
                    if cur is None or (dist, j) < cur:
                        out[qi] = (dist, j)
    return out
