"""Point-set containers, exact metrics, file formats, and the scan oracle.

Binary points are stored bit-packed (ceil(d/64) machine words per point,
unused trailing bits zero) so Hamming distances reduce to popcounts over
XORs; an unpacked 0/1 matrix view is cached for the batched kernels.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


def popcount64(arr: np.ndarray) -> np.ndarray:
    """SWAR popcount of a uint64 array."""
    arr = arr.copy()
    arr -= (arr >> np.uint64(1)) & _M1
    arr = (arr & _M2) + ((arr >> np.uint64(2)) & _M2)
    arr = (arr + (arr >> np.uint64(4))) & _M4
    with np.errstate(over="ignore"):
        arr *= _H01
    return arr >> np.uint64(56)


@dataclass(frozen=True)
class BinaryPointSet:
    """Bit-packed set of d-dimensional Boolean points."""

    d: int
    words: np.ndarray  # (count, ceil(d/64)) uint64, trailing bits zero
    _bits_cache: list = field(default_factory=lambda: [None], repr=False, compare=False)

    @property
    def count(self) -> int:
        return self.words.shape[0]

    @classmethod
    def from_bits(cls, bits) -> "BinaryPointSet":
        mat = np.asarray(bits, dtype=np.uint8)
        if mat.ndim != 2:
            raise ValueError("expected a 2-d array of bits")
        n, d = mat.shape
        if d == 0 or np.any(mat > 1):
            raise ValueError("entries must be 0/1 with d >= 1")
        nwords = -(-d // 64)
        padded = np.zeros((n, nwords * 64), dtype=np.uint8)
        padded[:, :d] = mat
        words = np.zeros((n, nwords), dtype=np.uint64)
        for w in range(nwords):
            chunk = padded[:, 64 * w : 64 * (w + 1)].astype(np.uint64)
            shifts = np.arange(64, dtype=np.uint64)
            words[:, w] = (chunk << shifts).sum(axis=1, dtype=np.uint64)
        ps = cls(d=d, words=words)
        ps._bits_cache[0] = mat.copy()
        return ps

    def bits(self) -> np.ndarray:
        """Unpacked (count, d) uint8 view, cached."""
        if self._bits_cache[0] is None:
            n, nwords = self.words.shape
            out = np.zeros((n, nwords * 64), dtype=np.uint8)
            for w in range(nwords):
                col = self.words[:, w]
                for b in range(64):
                    out[:, 64 * w + b] = (col >> np.uint64(b)) & np.uint64(1)
            self._bits_cache[0] = out[:, : self.d]
        return self._bits_cache[0]

    def hamming(self, i: int, j: int, other: "BinaryPointSet | None" = None) -> int:
        rhs = (other or self).words[j]
        return int(popcount64(self.words[i] ^ rhs).sum())

    def complement(self) -> "BinaryPointSet":
        """Flip every bit; farthest neighbors reduce to nearest ones here."""
        return BinaryPointSet.from_bits(1 - self.bits())


def hamming_distance_matrix(a: BinaryPointSet, b: BinaryPointSet) -> np.ndarray:
    """All-pairs Hamming distances via a +/-1 agreement product."""
    if a.d != b.d:
        raise ValueError("dimension mismatch")
    pa = (2 * a.bits().astype(np.float32) - 1.0)
    pb = (2 * b.bits().astype(np.float32) - 1.0)
    # entries and partial sums stay far below 2^24, so float32 is exact
    agree = (a.d + (pa @ pb.T)) / 2.0
    return (a.d - agree).astype(np.int64)


@dataclass(frozen=True)
class IntegerPointSet:
    """Points in [0, U)^d with integer coordinates."""

    d: int
    U: int
    coords: np.ndarray  # (count, d) int64

    @property
    def count(self) -> int:
        return self.coords.shape[0]

    @classmethod
    def from_rows(cls, rows, U: int) -> "IntegerPointSet":
        mat = np.asarray(rows, dtype=np.int64)
        if mat.ndim != 2:
            raise ValueError("expected a 2-d array")
        if mat.size and (mat.min() < 0 or mat.max() >= U):
            raise ValueError(f"coordinates must lie in [0, {U})")
        return cls(d=mat.shape[1], U=U, coords=mat)


def l1_distance_matrix(a: IntegerPointSet, b: IntegerPointSet) -> np.ndarray:
    return np.abs(a.coords[:, None, :] - b.coords[None, :, :]).sum(axis=2)


def l2_squared_matrix(a: IntegerPointSet, b: IntegerPointSet) -> np.ndarray:
    diff = a.coords[:, None, :] - b.coords[None, :, :]
    return (diff * diff).sum(axis=2)


# ---------------------------------------------------------------------------
# reports


@dataclass(frozen=True)
class NeighborRow:
    red_index: int
    blue_index: int
    distance: float  # exact int for hamming/l1; sqrt of an exact square for l2
    mode: str        # exact | additive-eps | multiplicative-1+eps


@dataclass(frozen=True)
class NeighborReport:
    rows: tuple[NeighborRow, ...]
    metadata: dict

    def to_csv(self) -> str:
        lines = ["red_index,blue_index,distance,mode"]
        for r in self.rows:
            dist = int(r.distance) if float(r.distance).is_integer() else repr(r.distance)
            lines.append(f"{r.red_index},{r.blue_index},{dist},{r.mode}")
        return "\n".join(lines) + "\n"

    def metadata_json(self) -> str:
        return json.dumps({"schema": 1, **self.metadata}, sort_keys=True)


def verify_report(report: NeighborReport, red, blue, metric: str) -> bool:
    """Re-verify that every reported distance matches its named pair."""
    for r in report.rows:
        if metric == "hamming":
            true = red.hamming(r.red_index, r.blue_index, blue)
        elif metric == "l1":
            true = int(np.abs(red.coords[r.red_index] - blue.coords[r.blue_index]).sum())
        else:
            diff = red.coords[r.red_index] - blue.coords[r.blue_index]
            true = float(np.sqrt(int((diff * diff).sum())))
        if abs(float(r.distance) - float(true)) > 1e-9:
            return False
    return True


# ---------------------------------------------------------------------------
# brute-force oracle


def brute_force_nn(red, blue, metric: str = "hamming", farthest: bool = False) -> NeighborReport:
    """Exact O(n^2 d) scan; ties broken by smallest blue index."""
    if metric == "hamming":
        dist = hamming_distance_matrix(red, blue)
    elif metric == "l1":
        dist = l1_distance_matrix(red, blue)
    elif metric == "l2":
        dist = l2_squared_matrix(red, blue)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    if red.count < 1 or blue.count < 1:
        raise ValueError("point sets must be nonempty")
    pick = np.argmax(dist, axis=1) if farthest else np.argmin(dist, axis=1)
    rows = []
    for i, j in enumerate(pick.tolist()):
        d_ij = int(dist[i, j])
        rows.append(
            NeighborRow(i, j, float(np.sqrt(d_ij)) if metric == "l2" else d_ij, "exact")
        )
    meta = {"oracle": "brute-force", "metric": metric, "farthest": farthest}
    return NeighborReport(rows=tuple(rows), metadata=meta)


# ---------------------------------------------------------------------------
# file formats (documented in docs/formats.md)


def write_points_csv(path, points) -> None:
    if isinstance(points, BinaryPointSet):
        d, u, mat = points.d, 2, points.bits()
    else:
        d, u, mat = points.d, points.U, points.coords
    with open(path, "w") as fh:
        fh.write(f"d={d},u={u}\n")
        for row in mat:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def read_points_csv(path):
    """Returns BinaryPointSet when u=2, IntegerPointSet otherwise."""
    with open(path) as fh:
        header = fh.readline().strip()
        try:
            dpart, upart = header.split(",")
            d = int(dpart.split("=")[1])
            u = int(upart.split("=")[1])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"bad point-file header {header!r}") from exc
        rows = []
        for line in fh:
            line = line.strip()
            if line:
                rows.append([int(v) for v in line.split(",")])
    for row in rows:
        if len(row) != d:
            raise ValueError("row width does not match header dimension")
    if u == 2:
        return BinaryPointSet.from_bits(rows)
    return IntegerPointSet.from_rows(rows, u)


def write_points_tpnn(path, points: BinaryPointSet) -> None:
    """Binary format: magic 'TPNN', u32 d, u32 n, rows of ceil(d/64) u64 LE."""
    with open(path, "wb") as fh:
        fh.write(b"TPNN")
        fh.write(struct.pack("<II", points.d, points.count))
        fh.write(points.words.astype("<u8").tobytes())


def read_points_tpnn(path) -> BinaryPointSet:
    with open(path, "rb") as fh:
        if fh.read(4) != b"TPNN":
            raise ValueError("bad magic; not a TPNN file")
        d, n = struct.unpack("<II", fh.read(8))
        nwords = -(-d // 64)
        words = np.frombuffer(fh.read(8 * n * nwords), dtype="<u8").reshape(n, nwords)
    mask = np.zeros(nwords, dtype=np.uint64)
    for b in range(d):
        mask[b // 64] |= np.uint64(1) << np.uint64(b % 64)
    if np.any(words & ~mask):
        raise ValueError("trailing bits beyond dimension d must be zero")
    return BinaryPointSet(d=d, words=words.astype(np.uint64))
