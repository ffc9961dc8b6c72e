"""Exact MAX-SAT via the polynomial method, plus width reduction.

The k-CNF solver follows the split recipe: pick s good variables (ones
occurring in few clauses), precompute the contribution of the untouched
clauses over all suffix assignments with the all-points evaluator, and
decide each satisfaction target by evaluating, for every prefix
assignment, a probabilistic PTF applied to the weighted count of touched
clauses.  Weighted clauses are treated as that many virtual bits, so the
threshold machinery is unchanged.  An assignment is recovered by fixing
variables one at a time and re-deciding on the restricted rectangle; the
returned value is always the recount of the returned assignment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .multilinear import eval_all_points_np
from .prob_ptf import ProbPtfSample, sample_prob_ptf
from .prob_ptf import _KWISE_SCALE, _TAG_INNER, _TAG_R
from .prob_threshold import _TAG_LEVEL
from .randomness import Seed, as_seed, kwise_coeffs_batch, kwise_indices_batch, next_prime_at_least

_TAG_MAXSAT = 0x3A7  # per-(block, rep) sample streams

_FLOAT_SLACK = 2.0**-48
_SUFFIX_GUARD = 24


class WidthError(ValueError):
    """A clause exceeds the stated width bound k."""


class TooManyVariablesError(ValueError):
    """Brute force / suffix enumeration guard tripped."""


@dataclass(frozen=True)
class CnfFormula:
    """Weighted clause list over variables 1..nvars.

    Clauses are literal tuples (+v or -v).  Normalization merges repeated
    literals and removes tautological clauses (complementary pair), whose
    weight is credited unconditionally via always_true_weight.
    """

    nvars: int
    clauses: tuple[tuple[int, ...], ...]
    weights: tuple[int, ...]
    always_true_weight: int = 0

    @staticmethod
    def build(nvars: int, clauses, weights=None) -> "CnfFormula":
        weights = [1] * len(clauses) if weights is None else list(weights)
        if len(weights) != len(clauses):
            raise ValueError("one weight per clause required")
        kept, kept_w, taut = [], [], 0
        for lits, w in zip(clauses, weights):
            if w <= 0:
                raise ValueError("weights must be positive integers")
            seen = dict.fromkeys(lits)
            if not seen:
                raise ValueError("empty clause not permitted")
            merged = tuple(seen)
            for lit in merged:
                v = abs(lit)
                if not 1 <= v <= nvars:
                    raise ValueError(f"literal {lit} out of range")
            if any(-lit in seen for lit in merged):
                taut += w
                continue
            kept.append(merged)
            kept_w.append(int(w))
        return CnfFormula(nvars, tuple(kept), tuple(kept_w), taut)

    @property
    def total_weight(self) -> int:
        return self.always_true_weight + sum(self.weights)

    @property
    def max_width(self) -> int:
        return max((len(c) for c in self.clauses), default=0)

    def satisfied_weight(self, assignment) -> int:
        """Weight satisfied by a 0/1 vector indexed by variable-1."""
        total = self.always_true_weight
        for lits, w in zip(self.clauses, self.weights):
            for lit in lits:
                val = assignment[abs(lit) - 1]
                if (lit > 0 and val) or (lit < 0 and not val):
                    total += w
                    break
        return total


@dataclass(frozen=True)
class MaxSatResult:
    best_weight: int
    assignment: tuple[int, ...]
    metadata: dict


# ---------------------------------------------------------------------------
# DIMACS / WDIMACS


def parse_dimacs(text: str) -> CnfFormula:
    """Parse DIMACS CNF ('p cnf') or weighted WDIMACS ('p wcnf')."""
    nvars = None
    weighted = False
    clauses, weights = [], []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith(("c", "%")):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) < 4 or parts[1] not in ("cnf", "wcnf"):
                raise ValueError(f"bad problem line: {line!r}")
            weighted = parts[1] == "wcnf"
            nvars = int(parts[2])
            continue
        if nvars is None:
            raise ValueError("clause before problem line")
        nums = [int(tok) for tok in line.split()]
        if nums and nums[-1] == 0:
            nums = nums[:-1]
        if not nums:
            continue
        if weighted:
            weights.append(nums[0])
            clauses.append(tuple(nums[1:]))
        else:
            weights.append(1)
            clauses.append(tuple(nums))
    if nvars is None:
        raise ValueError("missing problem line")
    return CnfFormula.build(nvars, clauses, weights)


# ---------------------------------------------------------------------------
# brute-force oracle


def brute_force_maxsat(f: CnfFormula) -> MaxSatResult:
    """Exhaustive scan; ties broken by numerically smallest assignment
    (variable i is bit i-1 of the assignment index)."""
    n = f.nvars
    if n > 26:
        raise TooManyVariablesError("brute force guarded at n <= 26")
    best_w, best_a = -1, 0
    chunk = 1 << min(n, 20)
    for base in range(0, 1 << n, chunk):
        idx = np.arange(base, base + chunk, dtype=np.int64)
        total = np.zeros(len(idx), dtype=np.int64)
        for lits, w in zip(f.clauses, f.weights):
            unsat = np.ones(len(idx), dtype=bool)
            for lit in lits:
                bit = (idx >> (abs(lit) - 1)) & 1
                unsat &= (bit == 0) if lit > 0 else (bit == 1)
            total += w * (~unsat)
        j = int(np.argmax(total))
        if total[j] > best_w:
            best_w, best_a = int(total[j]), base + j
    assignment = tuple((best_a >> i) & 1 for i in range(n))
    return MaxSatResult(
        best_weight=best_w + f.always_true_weight,
        assignment=assignment,
        metadata={"oracle": "brute-force"},
    )


# ---------------------------------------------------------------------------
# the split decision engine


def _clause_sum_all_points(clauses, weights, var_to_bit, m) -> np.ndarray:
    """Tabulate sum_j w_j C_j over all 2^m suffix assignments.

    Each clause indicator expands by inclusion-exclusion into at most 2^k
    multilinear monomials; the table is then one zeta-transform pass.
    """
    terms: dict[int, int] = {}

    def add(mask, coeff):
        terms[mask] = terms.get(mask, 0) + coeff

    for lits, w in zip(clauses, weights):
        # C = 1 - prod(1 - lit): expand the product over the literals
        acc = {0: 1}
        for lit in lits:
            bit = 1 << var_to_bit[abs(lit)]
            nxt: dict[int, int] = {}
            for mask, c in acc.items():
                if lit > 0:  # (1 - x)
                    nxt[mask] = nxt.get(mask, 0) + c
                    nxt[mask | bit] = nxt.get(mask | bit, 0) - c
                else:  # (1 - (1 - x)) = x
                    nxt[mask | bit] = nxt.get(mask | bit, 0) + c
            acc = nxt
        add(0, w)
        for mask, c in acc.items():
            add(mask, -w * c)
    if not terms:
        return np.zeros(1 << m, dtype=np.int64)
    masks = np.fromiter(terms.keys(), dtype=np.int64, count=len(terms))
    coeffs = np.fromiter(terms.values(), dtype=np.int64, count=len(terms))
    return eval_all_points_np(masks, coeffs, m)


def _suffix_sat_matrix(clause_suffix_lits, var_to_bit, m):
    """S[j, suffix] = 1 iff clause j's suffix part is satisfied."""
    size = 1 << m
    idx = np.arange(size, dtype=np.int64)
    out = np.zeros((len(clause_suffix_lits), size), dtype=np.int8)
    for j, lits in enumerate(clause_suffix_lits):
        unsat = np.ones(size, dtype=bool)
        for lit in lits:
            bit = (idx >> var_to_bit[abs(lit)]) & 1
            unsat &= (bit == 0) if lit > 0 else (bit == 1)
        out[j] = ~unsat
    return out


@dataclass
class _SplitInstance:
    """Arrays shared by every decision on one (formula, seed) pair."""

    f: CnfFormula
    s: int
    prefix_vars: list[int]
    suffix_vars: list[int]
    j_idx: list[int]          # clause indices touching prefix variables
    w_j: np.ndarray           # weights of J clauses
    virtual_total: int        # sum of J weights (threshold arity)
    prefix_sat: np.ndarray    # (n_j, 2^s) clause prefix-part satisfied
    suffix_sat: np.ndarray    # (n_j, 2^suffix) clause suffix-part satisfied
    t0: np.ndarray            # untouched-clause weight per suffix
    s_full: np.ndarray        # (2^s, 2^suffix) weighted J count
    templates: dict           # t' -> ProbPtfSample parameter template
    tables: dict              # t' -> (nums, den, floats)
    gates_rep: dict           # (rep) -> list over levels of (2^s, 2^suffix) counts
    seed: Seed
    amp: float
    c0: float


def _clause_split(lits, prefix_set):
    pre = tuple(l for l in lits if abs(l) in prefix_set)
    suf = tuple(l for l in lits if abs(l) not in prefix_set)
    return pre, suf


def _build_split(f: CnfFormula, k: int, s: int | None, seed: Seed, c0: float) -> _SplitInstance:
    n = f.nvars
    if f.max_width > k:
        raise WidthError(f"clause width {f.max_width} exceeds k={k}")
    c_density = max(len(f.clauses) / max(n, 1), 1e-9)
    occurrences = {v: 0 for v in range(1, n + 1)}
    for lits in f.clauses:
        for lit in lits:
            occurrences[abs(lit)] += 1
    cap = 2 * k * c_density
    good = [v for v in range(1, n + 1) if occurrences[v] <= cap]
    if s is None:
        s = max(1, min(6, n // 2 - 1)) if n >= 4 else 1
    if s >= max(n, 2) / 2:
        s = max((n - 1) // 2, 1)
    s = min(s, len(good)) if good else 0
    prefix_vars = good[:s]
    prefix_set = set(prefix_vars)
    suffix_vars = [v for v in range(1, n + 1) if v not in prefix_set]
    m = len(suffix_vars)
    if m > _SUFFIX_GUARD:
        raise TooManyVariablesError(f"suffix enumeration guarded at {_SUFFIX_GUARD} variables")
    var_to_bit = {v: i for i, v in enumerate(suffix_vars)}

    j_idx = [j for j, lits in enumerate(f.clauses) if any(abs(l) in prefix_set for l in lits)]
    not_j = [j for j in range(len(f.clauses)) if j not in set(j_idx)]

    # untouched clauses: their weighted indicator sum is a multilinear
    # polynomial over the suffix variables (prefix-free by construction);
    # tabulate it on every suffix with the all-points evaluator
    t0 = _clause_sum_all_points([f.clauses[j] for j in not_j],
                                [f.weights[j] for j in not_j], var_to_bit, m)

    splits = [_clause_split(f.clauses[j], prefix_set) for j in j_idx]
    pre_parts = [p for p, _ in splits]
    suf_parts = [sfx for _, sfx in splits]
    suffix_sat = _suffix_sat_matrix(suf_parts, var_to_bit, m)
    # prefix-part satisfaction per prefix assignment (bit i of a = prefix_vars[i])
    n_pre = 1 << s
    prefix_sat = np.zeros((len(j_idx), n_pre), dtype=np.int8)
    a_idx = np.arange(n_pre, dtype=np.int64)
    pbit = {v: i for i, v in enumerate(prefix_vars)}
    for jj, lits in enumerate(pre_parts):
        unsat = np.ones(n_pre, dtype=bool)
        for lit in lits:
            bit = (a_idx >> pbit[abs(lit)]) & 1
            unsat &= (bit == 0) if lit > 0 else (bit == 1)
        prefix_sat[jj] = ~unsat

    w_j = np.array([f.weights[j] for j in j_idx], dtype=np.int64)
    virtual_total = int(w_j.sum())

    # weighted J count for every (prefix, suffix): sat = pre OR suf
    sat_f = suffix_sat.astype(np.float32)
    s_full = np.empty((n_pre, 1 << m), dtype=np.int64)
    for a in range(n_pre):
        pre_mask = prefix_sat[:, a].astype(bool)
        base = int(w_j[pre_mask].sum())
        rest = w_j[~pre_mask].astype(np.float32)
        s_full[a] = base + np.rint(rest @ sat_f[~pre_mask]).astype(np.int64)

    return _SplitInstance(
        f=f, s=s, prefix_vars=prefix_vars, suffix_vars=suffix_vars, j_idx=j_idx,
        w_j=w_j, virtual_total=virtual_total, prefix_sat=prefix_sat,
        suffix_sat=suffix_sat, t0=t0, s_full=s_full, templates={}, tables={},
        gates_rep={}, seed=seed, amp=0.0, c0=c0,
    )


def _template_for(inst: _SplitInstance, t_prime: int) -> ProbPtfSample | None:
    """Parameter template (shared across blocks) for threshold t_prime."""
    if t_prime in inst.templates:
        return inst.templates[t_prime]
    w = inst.virtual_total
    tmpl = None
    if w >= 1 and 0 <= t_prime <= w:
        tmpl = sample_prob_ptf(w, inst.amp, t_prime, Fraction(1, w), Seed(0), c0=inst.c0)
    inst.templates[t_prime] = tmpl
    return tmpl


def _table_for(inst: _SplitInstance, t_prime: int):
    got = inst.tables.get(t_prime)
    if got is not None:
        return got
    tmpl = inst.templates[t_prime]
    den = math.lcm(*(c.denominator for c in tmpl.outer.coeffs)) if tmpl.outer.coeffs else 1
    nums_c = [int(c * den) for c in tmpl.outer.coeffs]
    outs = []
    for y in range(inst.virtual_total + 1):
        x = y - tmpl.t_minus
        acc = 0
        for c in reversed(nums_c):
            acc = acc * x + c
        outs.append(acc)
    floats = np.array([float(Fraction(v, den)) for v in outs], dtype=np.float64)
    result = (outs, den, floats)
    inst.tables[t_prime] = result
    return result


def _rep_counts(inst: _SplitInstance, rep: int, template: ProbPtfSample) -> list[np.ndarray]:
    """Per-level weighted clause counts for each (prefix block, suffix).

    Level 0 uses the sampled virtual-bit multiset R of each block; deeper
    levels compose the inner index maps.  All levels reduce to one small
    matrix product against the clause satisfaction matrix.
    """
    key = (rep, template.r, len(template.inner.levels))
    got = inst.gates_rep.get(key)
    if got is not None:
        return got
    n_pre = 1 << inst.s
    w = inst.virtual_total
    base = np.array(
        [inst.seed.derive(_TAG_MAXSAT, a, rep).value for a in range(n_pre)], dtype=np.uint64
    )
    from .randomness import derive_array

    if template.r == w:
        positions = np.tile(np.arange(w, dtype=np.int64), (n_pre, 1))
    else:
        k_r = max(1, math.floor(_KWISE_SCALE * math.log(8.0 * inst.amp)))
        p = next_prime_at_least(max(w, 2))
        coeffs = kwise_coeffs_batch(derive_array(base, _TAG_R), k_r, p)
        positions = kwise_indices_batch(coeffs, p, template.r, w)
    # map virtual-bit positions to clause ids (weights as multiplicity)
    cum = np.cumsum(inst.w_j)
    level_positions = [positions]
    inner_seeds = derive_array(base, _TAG_INNER)
    for j, lv in enumerate(template.inner.levels):
        gen_seeds = derive_array(inner_seeds, _TAG_LEVEL, j + 1)
        coeffs = kwise_coeffs_batch(gen_seeds, lv.k, lv.prime)
        maps = kwise_indices_batch(coeffs, lv.prime, lv.m_next, lv.m)
        level_positions.append(np.take_along_axis(level_positions[-1], maps, axis=1))

    counts = []
    sat_f = inst.suffix_sat.astype(np.float32)
    for pos in level_positions:
        clause_ids = np.searchsorted(cum, pos, side="right")
        mult = np.zeros((n_pre, len(inst.j_idx)), dtype=np.float32)
        np.add.at(mult, (np.repeat(np.arange(n_pre), pos.shape[1]), clause_ids.ravel()), 1.0)
        arr = np.empty((n_pre, inst.suffix_sat.shape[1]), dtype=np.int64)
        for a in range(n_pre):
            pre_mask = inst.prefix_sat[:, a].astype(bool)
            const = float(mult[a][pre_mask].sum())
            arr[a] = np.rint(const + mult[a][~pre_mask] @ sat_f[~pre_mask]).astype(np.int64)
        counts.append(arr)
    inst.gates_rep[key] = counts
    return counts


def _decide(inst: _SplitInstance, t_core: int, rep: int,
            prefix_allow: np.ndarray, suffix_allow: np.ndarray) -> bool:
    """Is there an allowed assignment satisfying core weight > t_core?"""
    t_prime_arr = t_core - inst.t0
    n_pre = 1 << inst.s
    sep = 2 * n_pre

    suffix_live = suffix_allow.copy()
    # thresholds above the whole touched weight can never fire; below zero
    # always fire (some allowed prefix exists)
    always = suffix_live & (t_prime_arr < 0)
    if prefix_allow.any() and always.any():
        return True
    undecided = suffix_live & (t_prime_arr >= 0) & (t_prime_arr <= inst.virtual_total)
    if not undecided.any() or not prefix_allow.any():
        return False

    for t_prime in sorted(set(t_prime_arr[undecided].tolist())):
        tmpl = _template_for(inst, int(t_prime))
        if tmpl is None:
            continue
        counts = _rep_counts(inst, rep, tmpl)
        nums, den, floats = _table_for(inst, int(t_prime))
        sel = undecided & (t_prime_arr == t_prime)
        cols = np.nonzero(sel)[0]
        theta = tmpl.inner.theta
        thr_num = (theta * tmpl.r).numerator
        thr_den = (theta * tmpl.r).denominator
        thr = -((-thr_num) // thr_den)
        f_hat = np.zeros(len(cols), dtype=np.float64)
        mag = np.zeros(len(cols), dtype=np.float64)
        gates_list = []
        for a in range(n_pre):
            if not prefix_allow[a]:
                gates_list.append(None)
                continue
            gate = _gate_for_block(inst, tmpl, counts, a, cols, thr)
            gates_list.append(gate)
            term = gate * floats[inst.s_full[a][cols]]
            f_hat += term
            mag += np.abs(term)
        err = mag * _FLOAT_SLACK + _FLOAT_SLACK
        fired = f_hat > sep + err
        if fired.any():
            return True
        ambiguous = np.nonzero(f_hat > sep - err)[0]
        for pos in ambiguous:
            total = 0
            for a in range(n_pre):
                if gates_list[a] is not None and gates_list[a][pos]:
                    total += int(gates_list[a][pos]) * nums[int(inst.s_full[a][cols[pos]])]
            if total > sep * den:
                return True
    return False


def _gate_for_block(inst, tmpl, counts, a, cols, thr_base) -> np.ndarray:
    """Inner gate values for one prefix block on selected suffixes.

    With a base-case inner sampler this is one comparison; recursive
    samplers combine window indicators exactly as in the search engine
    (in-window window values equal the threshold indicator).
    """
    inner = tmpl.inner
    if not inner.levels:
        return (counts[0][a][cols] >= thr_base).astype(np.int64)
    from .prob_threshold import window_poly as _wp

    def thr_int(theta, m):
        num, den = (theta * m).numerator, (theta * m).denominator
        return -((-num) // den)

    memo = {}

    def value(level, theta):
        key = (level, theta)
        if key in memo:
            return memo[key]
        y = counts[level][a][cols]
        if level == len(inner.levels):
            out = (y >= thr_int(theta, inner.base_arity)).astype(np.int64)
        else:
            lv = inner.levels[level]
            vm = value(level + 1, theta)
            vp = value(level + 1, theta + lv.delta)
            vn = value(level + 1, theta - lv.delta)
            sel = (1 - vp) * vn
            w = _wp(lv.m, theta, 2.0 * lv.a)
            ind = (y >= thr_int(theta, lv.m)).astype(np.int64)
            in_win = (y >= w.lo) & (y <= w.hi)
            # out-of-window exact window values are astronomically rare at
            # these arities; evaluate them honestly when they appear
            out = np.where(sel == 1, ind, vm)
            bad = (sel == 1) & ~in_win
            if bad.any():
                for i in np.nonzero(bad)[0]:
                    out[i] = w.eval_at_int(int(y[i])) * sel[i] + vm[i] * (1 - sel[i])
        memo[key] = out
        return out

    return value(0, inner.theta)


def _majority_decide(inst, t_core, reps, prefix_allow, suffix_allow) -> bool:
    votes = sum(
        _decide(inst, t_core, rep, prefix_allow, suffix_allow) for rep in range(reps)
    )
    return 2 * votes > reps


def max_ksat(
    f: CnfFormula,
    k: int,
    s: int | None = None,
    seed: "Seed | int | str" = 0,
    reps: int = 5,
) -> MaxSatResult:
    """Exact MAX-k-SAT: maximum satisfied weight plus a witness assignment.

    The reported weight is always the direct recount of the returned
    assignment; the decided optimum is echoed in the metadata so callers
    can see a (rare) witness-recovery failure.
    """
    seed = as_seed(seed)
    n = f.nvars
    if n < 1 or not f.clauses:
        assignment = tuple([0] * n)
        return MaxSatResult(f.always_true_weight, assignment, {"trivial": True})
    inst = _build_split(f, k, s, seed, c0=2.0)
    inst.amp = 10.0 * (1 << inst.s)

    core_total = int(sum(f.weights))
    opt_core = 0
    for t in range(core_total, 0, -1):
        full_prefix = np.ones(1 << inst.s, dtype=bool)
        full_suffix = np.ones(len(inst.t0), dtype=bool)
        if _majority_decide(inst, t - 1, reps, full_prefix, full_suffix):
            opt_core = t
            break

    # witness recovery: fix variables one at a time, re-deciding on the
    # restricted rectangle; majority voting as in the main loop
    prefix_allow = np.ones(1 << inst.s, dtype=bool)
    suffix_allow = np.ones(len(inst.t0), dtype=bool)
    assignment = [0] * n
    pbit = {v: i for i, v in enumerate(inst.prefix_vars)}
    sbit = {v: i for i, v in enumerate(inst.suffix_vars)}
    pre_idx = np.arange(1 << inst.s, dtype=np.int64)
    suf_idx = np.arange(len(inst.t0), dtype=np.int64)
    for v in range(1, n + 1):
        trial = []
        for val in (0, 1):
            if v in pbit:
                mask = prefix_allow & (((pre_idx >> pbit[v]) & 1) == val)
                trial.append((mask, suffix_allow))
            else:
                mask = suffix_allow & (((suf_idx >> sbit[v]) & 1) == val)
                trial.append((prefix_allow, mask))
        took = 1
        if opt_core == 0 or _majority_decide(inst, opt_core - 1, reps, *trial[0]):
            took = 0
        assignment[v - 1] = took
        prefix_allow, suffix_allow = trial[took]

    recount = f.satisfied_weight(assignment)
    meta = {
        "algorithm": "max-ksat",
        "k": k,
        "split": inst.s,
        "seed": seed.value,
        "reps": reps,
        "t_range": core_total,
        "decided_optimum": opt_core + f.always_true_weight,
        "good_variables": inst.prefix_vars,
    }
    return MaxSatResult(best_weight=recount, assignment=tuple(assignment), metadata=meta)


# ---------------------------------------------------------------------------
# width reduction for general CNF


def default_width(f: CnfFormula) -> int:
    c_density = max(len(f.clauses) / max(f.nvars, 1), 2.0)
    return max(3, math.ceil(math.log2(c_density)))


def maxsat_width_reduce(
    f: CnfFormula,
    k: int | None = None,
    s: int | None = None,
    seed: "Seed | int | str" = 0,
    reps: int = 5,
) -> MaxSatResult:
    """General MAX-SAT by branching long clauses down to width k.

    A clause (a1 v ... v aL) with L > k branches into (i) the truncated
    clause (a1 v ... v ak) and (ii) the instance with a1..ak all false;
    leaves are solved by max_ksat and the best branch wins.
    """
    if k is None:
        k = default_width(f)
    if k < 2:
        raise ValueError("width bound k must be >= 2")
    seed = as_seed(seed)
    branches = 0

    def substitute(formula: CnfFormula, fixed: dict[int, int]) -> CnfFormula | None:
        clauses, weights, taut = [], [], formula.always_true_weight
        for lits, w in zip(formula.clauses, formula.weights):
            cur = []
            satisfied = False
            for lit in lits:
                v = abs(lit)
                if v in fixed:
                    if (lit > 0) == bool(fixed[v]):
                        satisfied = True
                        break
                else:
                    cur.append(lit)
            if satisfied:
                taut += w
            elif cur:
                clauses.append(tuple(cur))
                weights.append(w)
            # fully falsified clause contributes nothing
        out = CnfFormula.build(formula.nvars, clauses, weights)
        return CnfFormula(out.nvars, out.clauses, out.weights, out.always_true_weight + taut)

    best: list = [None]

    def rec(formula: CnfFormula, fixed: dict[int, int], branch_seed: Seed):
        nonlocal branches
        wide = next((i for i, c in enumerate(formula.clauses) if len(c) > k), None)
        if wide is None:
            free = [v for v in range(1, formula.nvars + 1) if v not in fixed]
            remap = {v: i + 1 for i, v in enumerate(free)}
            sub_clauses = [tuple((1 if l > 0 else -1) * remap[abs(l)] for l in c) for c in formula.clauses]
            sub = CnfFormula.build(len(free), sub_clauses, formula.weights)
            sub = CnfFormula(sub.nvars, sub.clauses, sub.weights,
                             sub.always_true_weight + formula.always_true_weight)
            res = max_ksat(sub, k, s, branch_seed, reps)
            assignment = [0] * f.nvars
            for v, val in fixed.items():
                assignment[v - 1] = val
            for v in free:
                assignment[v - 1] = res.assignment[remap[v] - 1]
            value = f.satisfied_weight(assignment)
            if best[0] is None or value > best[0][0]:
                best[0] = (value, tuple(assignment))
            return
        branches += 1
        lits = formula.clauses[wide]
        head = lits[:k]
        # branch (i): truncate the clause
        trunk_clauses = list(formula.clauses)
        trunk_clauses[wide] = head
        trunk = CnfFormula(formula.nvars, tuple(trunk_clauses), formula.weights,
                           formula.always_true_weight)
        rec(trunk, dict(fixed), branch_seed.derive(1))
        # branch (ii): set the first k literals false
        fixed2 = dict(fixed)
        for lit in head:
            fixed2[abs(lit)] = 0 if lit > 0 else 1
        rec(substitute(formula, fixed2), fixed2, branch_seed.derive(2))

    rec(f, {}, seed)
    value, assignment = best[0]
    meta = {
        "algorithm": "maxsat-width-reduce",
        "k": k,
        "branches": branches,
        "seed": seed.value,
        "reps": reps,
    }
    return MaxSatResult(best_weight=value, assignment=assignment, metadata=meta)
