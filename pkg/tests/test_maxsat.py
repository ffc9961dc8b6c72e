"""MAX-SAT: formula normalization, the brute-force oracle, the split
solver, and width reduction, all cross-checked."""

import random

import numpy as np
import pytest

from threshpoly.maxsat import (
    CnfFormula,
    MaxSatResult,
    TooManyVariablesError,
    WidthError,
    brute_force_maxsat,
    default_width,
    max_ksat,
    maxsat_width_reduce,
    parse_dimacs,
)


def random_cnf(n, m, widths, rng, weighted=False):
    clauses, weights = [], []
    for _ in range(m):
        k = rng.choice(widths)
        vs = rng.sample(range(1, n + 1), k)
        clauses.append(tuple(v if rng.random() < 0.5 else -v for v in vs))
        weights.append(rng.randint(1, 5) if weighted else 1)
    return CnfFormula.build(n, clauses, weights)


def test_normalization_merges_and_flags_tautology():
    f = CnfFormula.build(3, [(1, 1, -2), (1, -1), (2, 3)])
    assert f.clauses == ((1, -2), (2, 3))
    assert f.always_true_weight == 1
    assert f.total_weight == 3


def test_normalization_rejects_empty_clause_and_bad_literal():
    with pytest.raises(ValueError):
        CnfFormula.build(2, [()])
    with pytest.raises(ValueError):
        CnfFormula.build(2, [(3,)])


def test_satisfied_weight_direct():
    f = CnfFormula.build(2, [(1, 2), (-1,), (-2,)])
    assert f.satisfied_weight((0, 0)) == 2
    assert f.satisfied_weight((1, 1)) == 1


def test_brute_force_hand_cases():
    f1 = CnfFormula.build(1, [(1,), (-1,)])
    assert brute_force_maxsat(f1).best_weight == 1
    f2 = CnfFormula.build(2, [(1, 2), (-1,), (-2,)])
    r = brute_force_maxsat(f2)
    assert r.best_weight == 2 and r.assignment == (0, 0)


def test_brute_force_tiebreak_smallest_assignment():
    f = CnfFormula.build(2, [(1, 2), (-1, -2)])  # any non-constant assignment gives 2
    r = brute_force_maxsat(f)
    assert r.assignment == (1, 0)  # index 1 is the smallest achieving 2


def test_brute_force_guard():
    with pytest.raises(TooManyVariablesError):
        brute_force_maxsat(CnfFormula.build(27, [(1,)]))


def test_brute_force_double_evaluation_random():
    rng = random.Random(0)
    f = random_cnf(10, 30, [3], rng)
    r = brute_force_maxsat(f)
    assert f.satisfied_weight(r.assignment) == r.best_weight


def test_max_ksat_width_guard():
    f = CnfFormula.build(5, [(1, 2, 3, 4)])
    with pytest.raises(WidthError):
        max_ksat(f, 3, seed=1)


def test_max_ksat_suffix_only_formula_is_decided_exactly():
    # All clauses on suffix variables: J is empty and the decision reduces
    # to the precomputed table, so the optimum is exact deterministically.
    rng = random.Random(2)
    clauses = [tuple(v if rng.random() < 0.5 else -v for v in rng.sample(range(5, 13), 2))
               for _ in range(12)]
    f = CnfFormula.build(12, clauses)
    want = brute_force_maxsat(f).best_weight
    for seed in range(3):
        got = max_ksat(f, 2, s=3, seed=seed, reps=3)
        assert got.best_weight == want


def test_max_ksat_unit_clauses_match_oracle():
    rng = random.Random(3)
    for trial in range(5):
        clauses = [((v if rng.random() < 0.5 else -v),) for v in rng.choices(range(1, 9), k=14)]
        f = CnfFormula.build(8, clauses)
        want = brute_force_maxsat(f).best_weight
        got = max_ksat(f, 1, s=3, seed=trial, reps=5)
        assert got.best_weight == want
        assert f.satisfied_weight(got.assignment) == got.best_weight


def test_max_ksat_random_3cnf_matches_oracle():
    rng = random.Random(4)
    hits = 0
    for trial in range(10):
        f = random_cnf(14, 56, [3], rng)
        want = brute_force_maxsat(f).best_weight
        got = max_ksat(f, 3, s=4, seed=100 + trial, reps=5)
        assert f.satisfied_weight(got.assignment) == got.best_weight
        hits += got.best_weight == want
    assert hits >= 9


def test_max_ksat_weighted_matches_oracle():
    rng = random.Random(5)
    for trial in range(4):
        f = random_cnf(12, 36, [2, 3], rng, weighted=True)
        want = brute_force_maxsat(f).best_weight
        got = max_ksat(f, 3, s=4, seed=trial, reps=5)
        assert got.best_weight == want


def test_width_reduce_no_branching_when_within_width():
    rng = random.Random(6)
    f = random_cnf(10, 20, [2, 3], rng)
    res = maxsat_width_reduce(f, k=3, seed=1, reps=3)
    assert res.metadata["branches"] == 0


def test_width_reduce_single_wide_clause_two_branches():
    f = CnfFormula.build(6, [(1, 2, 3, 4, 5), (6,)])
    res = maxsat_width_reduce(f, k=3, seed=1, reps=3)
    assert res.metadata["branches"] == 1  # one wide clause, two leaf calls
    assert res.best_weight == 2


def test_width_reduce_branch_cover_exhaustive_tiny():
    # Union of the two branch feasible sets must cover all assignments:
    # solving both branches and taking the max equals brute force.
    rng = random.Random(7)
    for trial in range(5):
        f = random_cnf(9, 18, [1, 2, 3, 4, 5], rng)
        want = brute_force_maxsat(f).best_weight
        got = maxsat_width_reduce(f, k=3, seed=trial, reps=5)
        assert got.best_weight == want
        assert f.satisfied_weight(got.assignment) == got.best_weight


def test_default_width_formula():
    f = random_cnf(10, 80, [2], random.Random(8))
    assert default_width(f) == max(3, int(np.ceil(np.log2(8))))


def test_parse_dimacs_and_wdimacs():
    f = parse_dimacs("c x\np cnf 3 2\n1 -2 0\n2 3 0\n")
    assert f.nvars == 3 and f.clauses == ((1, -2), (2, 3))
    fw = parse_dimacs("p wcnf 2 2 100\n3 1 0\n5 -1 2 0\n")
    assert fw.weights == (3, 5)
    with pytest.raises(ValueError):
        parse_dimacs("1 2 0\n")


def test_result_metadata_and_replay():
    f = CnfFormula.build(8, [(1, 2), (-1, 3), (4, -5), (6,), (-7, 8)])
    a = max_ksat(f, 2, s=3, seed=9, reps=3)
    b = max_ksat(f, 2, s=3, seed=9, reps=3)
    assert a == b
    assert isinstance(a, MaxSatResult)
    assert a.metadata["decided_optimum"] >= a.best_weight


def test_width_reduce_branch_constraints_cover_all_assignments():
    # Enumerate the branch tree's leaf constraints symbolically: every
    # assignment must be consistent with at least one leaf (the pure
    # truncation path has no fixed variables, so the union covers the
    # cube; this guards the branching rule against regressions).
    f = CnfFormula.build(6, [(1, 2, 3, 4, 5), (2, 3, 4, 5, 6), (1, -6)])
    k = 3
    leaves = []

    def rec(clauses, fixed):
        wide = next((c for c in clauses if len(c) > k), None)
        if wide is None:
            leaves.append(dict(fixed))
            return
        rest = [c for c in clauses if c is not wide]
        rec(rest + [wide[:k]], fixed)
        fixed2 = dict(fixed)
        for lit in wide[:k]:
            fixed2[abs(lit)] = 0 if lit > 0 else 1
        shrunk = []
        for c in rest:
            c2 = tuple(l for l in c if abs(l) not in fixed2 or ((l > 0) == bool(fixed2[abs(l)])))
            shrunk.append(c2)
        rec([c for c in shrunk if len(c) > k] + [c for c in shrunk if 0 < len(c) <= k]
            + ([wide[k:]] if len(wide) > k else []), fixed2)

    rec(list(f.clauses), {})
    for assignment in range(1 << 6):
        bits = [(assignment >> i) & 1 for i in range(6)]
        assert any(all(bits[v - 1] == val for v, val in leaf.items()) for leaf in leaves)
