"""Command-line front-end: construction dumps, search runs, benchmarks.

Every run prints a JSON metadata block with schema version 1 carrying all
parameters plus the seed, which is sufficient to reproduce the primary
output byte for byte.  Exit codes: 0 success, 1 usage error, 2 data
error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction

import numpy as np

from . import __version__
from .maxsat import max_ksat, maxsat_width_reduce, parse_dimacs
from .neighbors import approx_mst, approx_nn, offline_hamming_nn
from .points import (
    BinaryPointSet,
    IntegerPointSet,
    brute_force_nn,
    read_points_csv,
    verify_report,
)
from .prob_ptf import sample_prob_ptf, eval_prob_ptf
from .prob_threshold import empirical_error, eval_sampled, sample_threshold_poly
from .randomness import Seed
from .univariate import UnivariatePoly, as_fraction, chebyshev, discrete_chebyshev, ptf_threshold


class DataError(Exception):
    pass


def _meta(args: argparse.Namespace, **extra) -> str:
    payload = {"schema": 1, "version": __version__}
    payload.update({k: v for k, v in vars(args).items() if k not in ("func",)})
    payload.update(extra)
    return json.dumps(payload, sort_keys=True, default=str)


def _emit(args, text: str) -> None:
    if getattr(args, "output", None):
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_seed(text: str) -> Seed:
    return Seed.parse(text)


# ---------------------------------------------------------------------------
# poly


def _cmd_poly(args) -> int:
    if args.family == "chebyshev":
        poly = chebyshev(args.q)
    elif args.family == "discrete":
        poly = discrete_chebyshev(args.q, args.t)
    else:
        poly = ptf_threshold(args.s, args.t, as_fraction(args.eps))
    lines = [f"{c.numerator}/{c.denominator}" for c in poly.coeffs]
    out = "\n".join(lines) + "\n"
    if args.eval_at:
        for tok in args.eval_at.split(","):
            x = as_fraction(tok.strip())
            v = poly.eval(x)
            out += f"P({x}) = {v.numerator}/{v.denominator}\n"
    _emit(args, out)
    print(_meta(args, degree=poly.degree))
    return 0


# ---------------------------------------------------------------------------
# prob-poly


def _load_binary_points(path) -> BinaryPointSet:
    pts = read_points_csv(path)
    if not isinstance(pts, BinaryPointSet):
        raise DataError(f"{path}: expected binary points (header u=2)")
    return pts


def _cmd_prob_poly(args) -> int:
    seed = _parse_seed(args.seed)
    theta = as_fraction(args.theta)
    sp = sample_threshold_poly(args.n, theta, args.s, seed)
    lines = [f"n={args.n} theta={theta} s={args.s}"]
    lines.append(f"degree={sp.degree} random_bits={sp.random_bits} levels={len(sp.levels)}")
    lines.append("level_k=" + ",".join(str(k) for k in sp.level_ks()))
    if args.points:
        pts = _load_binary_points(args.points)
        if pts.d != args.n:
            raise DataError("points dimension must equal n")
        for i in range(pts.count):
            lines.append(f"point {i}: value {eval_sampled(sp, pts.bits()[i])}")
    if args.trials:
        lines.append("stratum,ones,trials,errors,rate,wilson_low,wilson_high")
        for r in empirical_error(args.n, theta, args.s, args.trials, seed):
            lines.append(
                f"{r.label},{r.ones},{r.trials},{r.errors},{r.rate:.6f},"
                f"{r.wilson_low:.6f},{r.wilson_high:.6f}"
            )
    _emit(args, "\n".join(lines) + "\n")
    print(_meta(args, degree=sp.degree, random_bits=sp.random_bits))
    return 0


def _cmd_ptf(args) -> int:
    seed = _parse_seed(args.seed)
    sample = sample_prob_ptf(args.n, args.s, args.t, as_fraction(args.eps), seed)
    lines = [
        f"n={args.n} s={args.s} t={args.t} eps={args.eps}",
        f"degree={sample.degree} random_bits={sample.random_bits} "
        f"r={sample.r} t_minus={sample.t_minus} t_prime={sample.t_prime}",
    ]
    if args.points:
        pts = _load_binary_points(args.points)
        if pts.d != args.n:
            raise DataError("points dimension must equal n")
        for i in range(pts.count):
            v = eval_prob_ptf(sample, pts.bits()[i])
            lines.append(f"point {i}: value {v.numerator}/{v.denominator}")
    _emit(args, "\n".join(lines) + "\n")
    print(_meta(args, degree=sample.degree, random_bits=sample.random_bits))
    return 0


# ---------------------------------------------------------------------------
# nn / ann / mst


def _cmd_nn(args) -> int:
    red = _load_binary_points(args.red)
    blue = _load_binary_points(args.blue)
    if red.d != blue.d:
        raise DataError("red and blue dimensions differ")
    report = offline_hamming_nn(
        red, blue,
        farthest=args.farthest,
        mode=args.mode,
        s=args.groups,
        seed=_parse_seed(args.seed),
        reps=args.reps,
        eps=None if args.eps is None else as_fraction(args.eps),
        threads=args.threads,
    )
    if not verify_report(report, red, blue, "hamming"):
        raise AssertionError("report verification failed")
    _emit(args, report.to_csv())
    print(report.metadata_json())
    return 0


def _load_integer_points(path) -> IntegerPointSet:
    pts = read_points_csv(path)
    if isinstance(pts, BinaryPointSet):
        return IntegerPointSet(d=pts.d, U=2, coords=pts.bits().astype(np.int64))
    return pts


def _cmd_ann(args) -> int:
    red = _load_integer_points(args.red)
    blue = _load_integer_points(args.blue)
    if red.d != blue.d:
        raise DataError("red and blue dimensions differ")
    report = approx_nn(
        red, blue, metric=args.metric, eps=args.eps, farthest=args.farthest,
        seed=_parse_seed(args.seed), reps=args.reps, s=args.groups,
    )
    if not verify_report(report, red, blue, args.metric):
        raise AssertionError("report verification failed")
    _emit(args, report.to_csv())
    print(report.metadata_json())
    return 0


def _cmd_mst(args) -> int:
    pts = _load_integer_points(args.input)
    res = approx_mst(pts, metric=args.metric, eps=args.eps, seed=_parse_seed(args.seed))
    if not res.is_spanning_tree(pts.count):
        raise AssertionError("output is not a spanning tree")
    lines = ["i,j,weight"]
    for i, j, w in res.edges:
        lines.append(f"{i},{j},{w}")
    lines.append(f"total,{res.total_weight}")
    _emit(args, "\n".join(lines) + "\n")
    print(json.dumps({"schema": 1, **res.metadata}, sort_keys=True))
    return 0


def _cmd_maxsat(args) -> int:
    with open(args.input) as fh:
        formula = parse_dimacs(fh.read())
    if args.k is not None and formula.max_width > args.k:
        res = maxsat_width_reduce(formula, k=args.k, s=args.split,
                                  seed=_parse_seed(args.seed), reps=args.reps)
    else:
        k = args.k if args.k is not None else max(formula.max_width, 1)
        res = max_ksat(formula, k, s=args.split, seed=_parse_seed(args.seed), reps=args.reps)
    payload = {
        "schema": 1,
        "optimum": res.best_weight,
        "assignment": "".join(str(b) for b in res.assignment),
        **res.metadata,
    }
    _emit(args, json.dumps(payload, sort_keys=True, default=str) + "\n")
    return 0


# ---------------------------------------------------------------------------
# bench


def _cmd_bench(args) -> int:
    rng = np.random.default_rng(Seed.parse(args.seed).value)
    sizes = [int(tok) for tok in args.sizes.split(",")]
    lines = ["n,t_poly,t_brute"]
    meta_rows = []
    for n in sizes:
        red = BinaryPointSet.from_bits(rng.integers(0, 2, (n, args.d)))
        blue = BinaryPointSet.from_bits(rng.integers(0, 2, (n, args.d)))
        t0 = time.perf_counter()
        rep = offline_hamming_nn(red, blue, mode="exact", seed=Seed.parse(args.seed))
        t_poly = time.perf_counter() - t0
        t0 = time.perf_counter()
        brute_force_nn(red, blue)
        t_brute = time.perf_counter() - t0
        lines.append(f"{n},{t_poly:.6f},{t_brute:.6f}")
        meta_rows.append({"n": n, "degree": rep.metadata["degree"],
                          "group_size": rep.metadata["group_size"]})
    _emit(args, "\n".join(lines) + "\n")
    print(_meta(args, rows=meta_rows))
    return 0


# ---------------------------------------------------------------------------
# selftest


def _cmd_selftest(args) -> int:
    import itertools

    from .multilinear import eval_all_points, expand_symmetric, matmul, MultilinearPoly
    from .prob_threshold import threshold_value, window_poly
    from .randomness import KWiseGenerator
    from .univariate import to_binomial_basis

    failures = []

    def check(name, ok):
        print(f"{'ok' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)

    # k-wise exact joint uniformity, p=3, k=2
    counts = {}
    for coeffs in itertools.product(range(3), repeat=2):
        g = KWiseGenerator(prime=3, k=2, coeffs=coeffs, domain=3)
        counts[(g.value_at(0), g.value_at(1))] = counts.get((g.value_at(0), g.value_at(1)), 0) + 1
    check("kwise pair law exact", set(counts.values()) == {1} and len(counts) == 9)

    # Chebyshev band spot checks
    p = ptf_threshold(4, 10, Fraction(1, 2))
    check("ptf low band", all(abs(p.eval(x)) <= 1 for x in range(11)))
    check("ptf amplified band", p.eval(15) >= 4)

    # window exactness
    w = window_poly(60, Fraction(1, 2), 1.5)
    check(
        "window exact on window",
        all(w.eval_at_int(y) == threshold_value(y, 60, Fraction(1, 2)) for y in range(w.lo, w.hi + 1)),
    )

    # pipeline fidelity on a tiny instance
    univ = UnivariatePoly.from_coeffs([1, -1, 2])
    ml = expand_symmetric(to_binomial_basis(univ), (0, 1, 2))
    vals = eval_all_points(ml)
    check(
        "all-points evaluation",
        all(vals[m] == univ.eval(bin(m).count("1")) for m in range(8)),
    )
    check("matmul identity", matmul([[1, 0], [0, 1]], [[5, 6], [7, 8]]) == [[5, 6], [7, 8]])

    # determinism of a small search run
    rng = np.random.default_rng(1)
    red = BinaryPointSet.from_bits(rng.integers(0, 2, (12, 8)))
    blue = BinaryPointSet.from_bits(rng.integers(0, 2, (12, 8)))
    r1 = offline_hamming_nn(red, blue, seed=Seed(9)).to_csv()
    r2 = offline_hamming_nn(red, blue, seed=Seed(9)).to_csv()
    check("seeded run reproducibility", r1 == r2)

    print(_meta(args, failures=failures))
    return 0 if not failures else 3


# ---------------------------------------------------------------------------
# dispatch


def build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="threshpoly", description=__doc__)
    top.add_argument("--threads", type=int, default=1,
                     help="worker cap; outputs are identical at any value")
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("poly", help="dump exact polynomial coefficients")
    p.add_argument("--family", choices=("chebyshev", "discrete", "ptf"), required=True)
    p.add_argument("--q", type=int, default=0)
    p.add_argument("--t", type=int, default=1)
    p.add_argument("--s", type=float, default=2.0)
    p.add_argument("--eps", default="0.5")
    p.add_argument("--eval-at", dest="eval_at", default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_poly)

    p = sub.add_parser("prob-poly", help="sample a probabilistic threshold polynomial")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--theta", default="1/2")
    p.add_argument("--s", type=float, default=4.0)
    p.add_argument("--seed", default="1")
    p.add_argument("--points", default=None)
    p.add_argument("--trials", type=int, default=0)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_prob_poly)

    p = sub.add_parser("ptf", help="sample a probabilistic PTF")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=float, default=4.0)
    p.add_argument("--t", type=int, required=True)
    p.add_argument("--eps", default="0.1")
    p.add_argument("--seed", default="1")
    p.add_argument("--points", default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_ptf)

    p = sub.add_parser("nn", help="offline exact Hamming nearest neighbors")
    p.add_argument("--red", required=True)
    p.add_argument("--blue", required=True)
    p.add_argument("--mode", choices=("exact", "approx", "det"), default="exact")
    p.add_argument("--eps", default=None)
    p.add_argument("--seed", default="1")
    p.add_argument("--groups", type=int, default=None)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--farthest", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_nn)

    p = sub.add_parser("ann", help="approximate l1/l2 nearest neighbors")
    p.add_argument("--red", required=True)
    p.add_argument("--blue", required=True)
    p.add_argument("--metric", choices=("l1", "l2"), default="l1")
    p.add_argument("--eps", type=float, default=0.3)
    p.add_argument("--seed", default="1")
    p.add_argument("--groups", type=int, default=None)
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--farthest", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_ann)

    p = sub.add_parser("mst", help="approximate minimum spanning tree")
    p.add_argument("--input", required=True)
    p.add_argument("--metric", choices=("l1", "l2"), default="l1")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--seed", default="1")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_mst)

    p = sub.add_parser("maxsat", help="exact MAX-SAT via the polynomial method")
    p.add_argument("--input", required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--split", type=int, default=None)
    p.add_argument("--seed", default="1")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_maxsat)

    p = sub.add_parser("bench", help="time polynomial-method NN against brute force")
    p.add_argument("--d", type=int, default=16)
    p.add_argument("--sizes", default="64,128,256")
    p.add_argument("--seed", default="1")
    p.add_argument("--output", default=None)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("selftest", help="run the embedded invariant suite")
    p.set_defaults(func=_cmd_selftest)

    return top


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 1 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (DataError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
