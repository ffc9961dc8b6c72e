"""Multilinear expansion, feature splitting, and batch evaluation kernels.

Monomials are stored as variable-index bitmasks (Python integers, so more
than 64 variables work transparently); coefficients are exact rationals.
The feature split rewrites a polynomial over left/right variable halves as
a dot product, so evaluating it on every (group, query) pair becomes one
integer matrix product.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb, lcm

import numpy as np

from .univariate import BinomialBasisPoly, as_fraction


class TooHighDegreeError(ValueError):
    """Symmetric expansion needs degree <= number of variables."""


class NonFactoringMonomialError(RuntimeError):
    """Internal error: a monomial failed to split into left/right parts."""


@dataclass(frozen=True)
class MultilinearPoly:
    """Sparse multilinear polynomial: {monomial bitmask: nonzero coefficient}.

    Bit j of a mask selects variable j (0-indexed).  Zero coefficients are
    never stored and masks never exceed nvars bits.
    """

    nvars: int
    terms: dict[int, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        for mask, c in self.terms.items():
            if mask >> self.nvars:
                raise ValueError(f"monomial {mask:#x} uses variables beyond nvars={self.nvars}")
            if c == 0:
                raise ValueError("zero coefficients must not be stored")

    @staticmethod
    def from_terms(nvars: int, terms: dict) -> "MultilinearPoly":
        clean = {}
        for mask, c in terms.items():
            c = as_fraction(c)
            if c != 0:
                clean[mask] = c
        return MultilinearPoly(nvars, clean)

    @property
    def degree(self) -> int:
        return max((m.bit_count() for m in self.terms), default=0)

    def __add__(self, other: "MultilinearPoly") -> "MultilinearPoly":
        if self.nvars != other.nvars:
            raise ValueError("arity mismatch")
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, Fraction(0)) + c
        return MultilinearPoly.from_terms(self.nvars, out)

    def scale(self, c) -> "MultilinearPoly":
        c = as_fraction(c)
        if c == 0:
            return MultilinearPoly(self.nvars, {})
        return MultilinearPoly(self.nvars, {m: v * c for m, v in self.terms.items()})

    def __mul__(self, other: "MultilinearPoly") -> "MultilinearPoly":
        if self.nvars != other.nvars:
            raise ValueError("arity mismatch")
        out: dict[int, Fraction] = {}
        for ma, ca in self.terms.items():
            for mb, cb in other.terms.items():
                m = ma | mb  # x_i^2 = x_i on the Boolean cube
                out[m] = out.get(m, Fraction(0)) + ca * cb
        return MultilinearPoly.from_terms(self.nvars, out)

    def eval(self, point: int | list | tuple | np.ndarray) -> Fraction:
        """Value at a Boolean point given as a bitmask or 0/1 sequence."""
        if not isinstance(point, int):
            bits = list(point)
            point = sum(1 << i for i, b in enumerate(bits) if b)
        total = Fraction(0)
        for m, c in self.terms.items():
            if m & point == m:
                total += c
        return total


def expand_symmetric(p: BinomialBasisPoly, variables) -> MultilinearPoly:
    """Expand a binomial-basis polynomial in y = sum(x) over given variables.

    C(y, j) equals the elementary symmetric polynomial e_j on Boolean
    points, so basis element j becomes the sum of all C(|vars|, j) degree-j
    monomials, scaled by its coefficient.
    """
    variables = tuple(variables)
    nvars = (max(variables) + 1) if variables else 0
    if p.degree > len(variables):
        raise TooHighDegreeError(
            f"degree {p.degree} exceeds the {len(variables)} available variables"
        )
    terms: dict[int, Fraction] = {}
    for j, c in enumerate(p.coeffs):
        if c == 0:
            continue
        for subset in combinations(variables, j):
            mask = 0
            for v in subset:
                mask |= 1 << v
            terms[mask] = terms.get(mask, Fraction(0)) + c
    return MultilinearPoly.from_terms(nvars, terms)


def hamming_agreement_substitute(p: MultilinearPoly, d: int) -> MultilinearPoly:
    """Substitute z_i -> a_i b_i + (1-a_i)(1-b_i) and expand multilinearly.

    Variables 0..d-1 of the result are the a side, d..2d-1 the b side.
    z_i is the per-coordinate agreement indicator, so a polynomial in the
    z's becomes the same function of a point pair's agreement pattern.
    """
    if p.nvars > d:
        raise ValueError(f"polynomial uses {p.nvars} variables but d={d}")
    out: dict[int, Fraction] = {}
    for mask, c in p.terms.items():
        # product over i in mask of (1 - a_i - b_i + 2 a_i b_i)
        acc = {0: Fraction(1)}
        i = 0
        mm = mask
        while mm:
            if mm & 1:
                a_bit, b_bit = 1 << i, 1 << (d + i)
                nxt: dict[int, Fraction] = {}
                for m0, c0 in acc.items():
                    for dm, dc in ((0, 1), (a_bit, -1), (b_bit, -1), (a_bit | b_bit, 2)):
                        key = m0 | dm
                        nxt[key] = nxt.get(key, Fraction(0)) + c0 * dc
                acc = nxt
            mm >>= 1
            i += 1
        for m0, c0 in acc.items():
            if c0 != 0:
                out[m0] = out.get(m0, Fraction(0)) + c * c0
    return MultilinearPoly.from_terms(2 * d, out)


def pair_monomial_count_bound(d: int, degree: int) -> int:
    """Closed-form cap on feature width: sum_j C(d,j) 3^j.

    Each degree-j agreement monomial expands into left/right monomial pairs
    (ma, mb) with ma, mb inside its support, at most 3^j distinct pairs.
    The literal-basis accounting sum_j C(d,j) 2^j applies to the one-hot
    evaluation path; both are reported by the search pipeline.
    """
    return sum(comb(d, j) * 3**j for j in range(min(degree, d) + 1))


# ---------------------------------------------------------------------------
# feature splitting


@dataclass(frozen=True)
class FeatureMatrixPair:
    """Left/right factor matrices of a pairwise-evaluation problem.

    dot(phi[g], psi[:, q]) equals scale * F(G_g, q_q) exactly; `scale` is
    the common denominator cleared out of the polynomial's coefficients.
    monomial_index maps (left-mask, right-mask) pairs to coordinates.
    """

    phi: list[list[int]]
    psi: list[list[int]]
    scale: int
    monomial_index: dict[tuple[int, int], int]

    @property
    def width(self) -> int:
        return len(self.monomial_index)


def _pack_bits(bits) -> int:
    return sum(1 << i for i, b in enumerate(bits) if b)


def split_features(p: MultilinearPoly, left_groups, right_points, d: int) -> FeatureMatrixPair:
    """Split a polynomial over a-variables [0,d) and b-variables [d,2d).

    left_groups: sequence of groups, each a sequence of left bit-vectors.
    right_points: sequence of right bit-vectors.  Coordinates are indexed
    by distinct (a-part, b-part) monomial pairs; phi aggregates coefficient
    times a-part evaluation over group members, psi holds bare b-part
    evaluations.
    """
    a_mask_all = (1 << d) - 1
    index: dict[tuple[int, int], int] = {}
    coords: list[tuple[int, int, Fraction]] = []
    for mask, c in sorted(p.terms.items()):
        ma = mask & a_mask_all
        mb = mask >> d
        if (ma | (mb << d)) != mask:
            raise NonFactoringMonomialError(f"monomial {mask:#x} does not factor")
        key = (ma, mb)
        if key in index:
            raise NonFactoringMonomialError(f"duplicate coordinate {key}")
        index[key] = len(coords)
        coords.append((ma, mb, c))

    scale = lcm(*(c.denominator for _, _, c in coords)) if coords else 1
    scaled = [int(c * scale) for _, _, c in coords]
    phi: list[list[int]] = []
    for group in left_groups:
        members = [_pack_bits(m) for m in group]
        row = []
        for (ma, _, _), cs in zip(coords, scaled):
            val = sum(1 for pm in members if ma & pm == ma)
            row.append(cs * val)
        phi.append(row)
    psi: list[list[int]] = [[] for _ in coords]
    for q in right_points:
        qm = _pack_bits(q)
        for ci, (_, mb, _) in enumerate(coords):
            psi[ci].append(1 if mb & qm == mb else 0)
    return FeatureMatrixPair(phi=phi, psi=psi, scale=scale, monomial_index=index)


# ---------------------------------------------------------------------------
# matrix multiplication backends


class MatmulShapeError(ValueError):
    pass


def _matmul_naive(a, b):
    n, m, k = len(a), len(b), len(b[0]) if b else 0
    return [[sum(a[i][t] * b[t][j] for t in range(m)) for j in range(k)] for i in range(n)]


def _matmul_blocked(a, b, block: int = 32):
    n, m = len(a), len(b)
    k = len(b[0]) if b else 0
    out = [[0] * k for _ in range(n)]
    for ii in range(0, n, block):
        for tt in range(0, m, block):
            for jj in range(0, k, block):
                for i in range(ii, min(ii + block, n)):
                    ai = a[i]
                    oi = out[i]
                    for t in range(tt, min(tt + block, m)):
                        av = ai[t]
                        if av:
                            bt = b[t]
                            for j in range(jj, min(jj + block, k)):
                                oi[j] += av * bt[j]
    return out


def _fits_int64(a, b) -> bool:
    max_a = max((max(map(abs, row), default=0) for row in a), default=0)
    max_b = max((max(map(abs, row), default=0) for row in b), default=0)
    inner = len(b)
    return max_a * max_b * max(inner, 1) < (1 << 62)


def _matmul_numpy(a, b):
    if not _fits_int64(a, b):
        # overflow-risk precheck failed: exact big-integer fallback
        return _matmul_blocked(a, b)
    an = np.asarray(a, dtype=np.int64)
    bn = np.asarray(b, dtype=np.int64)
    return (an @ bn).tolist()


MATMUL_BACKENDS = {
    "naive": _matmul_naive,
    "blocked": _matmul_blocked,
    "numpy": _matmul_numpy,
}

# The Coppersmith rectangular algorithm of the asymptotic analysis would
# register here; no implementation is provided (galactic), only the slot.
DEFAULT_BACKEND = "blocked"


def matmul(a, b, backend: str | None = None) -> list[list[int]]:
    """Exact integer matrix product with a pluggable backend.

    The numpy backend prechecks that every accumulator fits in int64 and
    silently falls back to the exact big-integer blocked loop otherwise.
    All backends return identical results.
    """
    a = [list(row) for row in np.asarray(a).tolist()] if isinstance(a, np.ndarray) else [list(r) for r in a]
    b = [list(row) for row in np.asarray(b).tolist()] if isinstance(b, np.ndarray) else [list(r) for r in b]
    n_inner = len(b)
    for row in a:
        if len(row) != n_inner:
            raise MatmulShapeError("inner dimensions do not conform")
    k = len(b[0]) if b else 0
    for row in b:
        if len(row) != k:
            raise MatmulShapeError("ragged right matrix")
    if n_inner == 0:
        return [[] for _ in a]
    fn = MATMUL_BACKENDS[backend or DEFAULT_BACKEND]
    return fn(a, b)


def write_tpmm(path, matrix) -> None:
    """Row-major binary export: magic 'TPMM', u64 dims, little-endian i64."""
    rows = [list(map(int, r)) for r in matrix]
    n = len(rows)
    m = len(rows[0]) if rows else 0
    with open(path, "wb") as fh:
        fh.write(b"TPMM")
        fh.write(struct.pack("<QQ", n, m))
        for row in rows:
            if len(row) != m:
                raise MatmulShapeError("ragged matrix")
            fh.write(struct.pack(f"<{m}q", *row))


def read_tpmm(path) -> list[list[int]]:
    with open(path, "rb") as fh:
        if fh.read(4) != b"TPMM":
            raise ValueError("bad magic; not a TPMM file")
        n, m = struct.unpack("<QQ", fh.read(16))
        out = []
        for _ in range(n):
            out.append(list(struct.unpack(f"<{m}q", fh.read(8 * m))))
    return out


# ---------------------------------------------------------------------------
# all-points evaluation over the Boolean cube


def eval_all_points(p: MultilinearPoly, m: int | None = None):
    """Values of p at every Boolean point of arity m, index = assignment mask.

    Uses the subset-sum (zeta) dynamic program in O(m 2^m) additions: the
    value at a point is the sum of coefficients of the monomials the point
    dominates.  Integer-coefficient polynomials whose magnitudes pass the
    int64 precheck run vectorized; anything else falls back to exact
    Python arithmetic.
    """
    m = p.nvars if m is None else m
    if m < p.nvars:
        raise ValueError("arity below polynomial's variable count")
    if m > 30:
        raise ValueError("arity guard: m must be <= 30")
    size = 1 << m
    int_ok = all(c.denominator == 1 for c in p.terms.values())
    if int_ok:
        total_mag = sum(abs(int(c)) for c in p.terms.values())
        if total_mag < (1 << 62):
            masks = np.fromiter(p.terms.keys(), dtype=np.int64, count=len(p.terms))
            coeffs = np.fromiter((int(c) for c in p.terms.values()), dtype=np.int64, count=len(p.terms))
            return eval_all_points_np(masks, coeffs, m).tolist()
    vals_py: list = [0] * size
    for mask, c in p.terms.items():
        vals_py[mask] += c if c.denominator > 1 else int(c)
    for bit in range(m):
        step = 1 << bit
        for base in range(size):
            if base & step:
                vals_py[base] += vals_py[base - step]
    return vals_py


def eval_all_points_np(masks: np.ndarray, coeffs: np.ndarray, m: int) -> np.ndarray:
    """int64 fast path used by the solvers: same zeta DP, array in/out."""
    size = 1 << m
    vals = np.zeros(size, dtype=np.int64)
    np.add.at(vals, masks, coeffs)
    for bit in range(m):
        step = 1 << bit
        half = vals.reshape(-1, 2 * step)
        half[:, step:] += half[:, :step]
    return vals
