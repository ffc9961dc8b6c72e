"""Point containers, metrics, file formats, and the brute-force oracle."""

import numpy as np
import pytest

from threshpoly.points import (
    BinaryPointSet,
    IntegerPointSet,
    brute_force_nn,
    hamming_distance_matrix,
    popcount64,
    read_points_csv,
    read_points_tpnn,
    verify_report,
    write_points_csv,
    write_points_tpnn,
)


def test_popcount64():
    arr = np.array([0, 1, 3, (1 << 64) - 1, 0x8000000000000000], dtype=np.uint64)
    assert popcount64(arr).tolist() == [0, 1, 2, 64, 1]


def test_bit_packing_round_trip_and_trailing_zero():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, (9, 70))
    ps = BinaryPointSet.from_bits(bits)
    assert ps.words.shape == (9, 2)
    fresh = BinaryPointSet(d=70, words=ps.words)
    assert np.array_equal(fresh.bits(), bits)
    # trailing bits of the second word must be zero
    assert np.all(ps.words[:, 1] >> np.uint64(6) == 0)


def test_hamming_via_words_matches_matrix():
    rng = np.random.default_rng(1)
    a = BinaryPointSet.from_bits(rng.integers(0, 2, (8, 130)))
    b = BinaryPointSet.from_bits(rng.integers(0, 2, (5, 130)))
    mat = hamming_distance_matrix(a, b)
    for i in range(8):
        for j in range(5):
            assert mat[i, j] == a.hamming(i, j, b)


def test_complement_flips_distances():
    rng = np.random.default_rng(2)
    a = BinaryPointSet.from_bits(rng.integers(0, 2, (4, 12)))
    comp = a.complement()
    for i in range(4):
        assert a.hamming(i, i, comp) == 12


def test_brute_force_hand_instance():
    red = BinaryPointSet.from_bits([[0, 0, 0, 0], [1, 1, 1, 1], [1, 0, 0, 0]])
    blue = BinaryPointSet.from_bits([[0, 0, 0, 1], [1, 1, 1, 1], [0, 0, 0, 0]])
    rep = brute_force_nn(red, blue)
    assert [(r.blue_index, r.distance) for r in rep.rows] == [(2, 0), (1, 0), (2, 1)]
    far = brute_force_nn(red, blue, farthest=True)
    assert far.rows[0].blue_index == 1 and far.rows[0].distance == 4


def test_brute_force_self_distance_zero_tiebreak():
    pts = BinaryPointSet.from_bits([[0, 1], [0, 1], [1, 1]])
    rep = brute_force_nn(pts, pts)
    assert rep.rows[0].blue_index == 0 and rep.rows[0].distance == 0
    assert rep.rows[1].blue_index == 0  # smallest blue index on ties


def test_l1_l2_oracle_and_verify():
    red = IntegerPointSet.from_rows([[0, 0], [3, 4]], 10)
    blue = IntegerPointSet.from_rows([[0, 1], [3, 0]], 10)
    l1 = brute_force_nn(red, blue, metric="l1")
    assert [(r.blue_index, r.distance) for r in l1.rows] == [(0, 1), (1, 4)]
    l2 = brute_force_nn(red, blue, metric="l2")
    assert l2.rows[1].distance == 4.0
    assert verify_report(l1, red, blue, "l1")
    assert verify_report(l2, red, blue, "l2")


def test_csv_round_trip_binary_and_integer(tmp_path):
    rng = np.random.default_rng(3)
    b = BinaryPointSet.from_bits(rng.integers(0, 2, (6, 10)))
    path = tmp_path / "b.csv"
    write_points_csv(path, b)
    again = read_points_csv(path)
    assert isinstance(again, BinaryPointSet)
    assert np.array_equal(again.bits(), b.bits())

    ints = IntegerPointSet.from_rows(rng.integers(0, 50, (4, 3)), 50)
    path2 = tmp_path / "i.csv"
    write_points_csv(path2, ints)
    again2 = read_points_csv(path2)
    assert isinstance(again2, IntegerPointSet)
    assert again2.U == 50 and np.array_equal(again2.coords, ints.coords)


def test_csv_header_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("dims=3\n1,0,1\n")
    with pytest.raises(ValueError):
        read_points_csv(path)


def test_tpnn_round_trip_and_magic(tmp_path):
    rng = np.random.default_rng(4)
    b = BinaryPointSet.from_bits(rng.integers(0, 2, (7, 100)))
    path = tmp_path / "p.tpnn"
    write_points_tpnn(path, b)
    again = read_points_tpnn(path)
    assert again.d == 100 and np.array_equal(again.bits(), b.bits())
    path.write_bytes(b"XXXX" + bytes(8))
    with pytest.raises(ValueError):
        read_points_tpnn(path)
