"""CLI dispatch, exit codes, output formats, and fixture reproducibility."""

import json
import subprocess
import sys
from pathlib import Path

import pytest

from threshpoly.cli import dispatch

FIXTURES = Path(__file__).parent / "fixtures"


def run_cli(args, capsys):
    code = dispatch(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_unknown_subcommand_exits_1(capsys):
    code, _, _ = run_cli(["definitely-not-a-command"], capsys)
    assert code == 1


def test_missing_file_is_data_error(capsys):
    code, _, err = run_cli(["nn", "--red", "/nonexistent", "--blue", "/nonexistent"], capsys)
    assert code == 2
    assert "error" in err


def test_poly_dump_format(capsys, tmp_path):
    out_file = tmp_path / "coeffs.csv"
    code, out, _ = run_cli(
        ["poly", "--family", "discrete", "--q", "1", "--t", "2",
         "--eval-at", "0,1,2", "--output", str(out_file)],
        capsys,
    )
    assert code == 0
    body = out_file.read_text()
    assert body.splitlines()[0:2] == ["2/1", "-2/1"]
    assert "P(2) = -2/1" in body
    meta = json.loads(out.strip().splitlines()[-1])
    assert meta["schema"] == 1 and meta["degree"] == 1


def test_prob_poly_report(capsys):
    code, out, _ = run_cli(
        ["prob-poly", "--n", "40", "--theta", "1/2", "--s", "4", "--seed", "7"],
        capsys,
    )
    assert code == 0
    assert "degree=" in out


def test_ptf_subcommand(capsys):
    code, out, _ = run_cli(
        ["ptf", "--n", "60", "--t", "30", "--s", "4", "--eps", "0.1", "--seed", "3"],
        capsys,
    )
    assert code == 0
    assert "random_bits=" in out


def test_nn_fixture_reproduces_byte_for_byte(capsys, tmp_path):
    out_file = tmp_path / "report.csv"
    code, out, _ = run_cli(
        ["nn", "--red", str(FIXTURES / "nn_red.csv"),
         "--blue", str(FIXTURES / "nn_blue.csv"),
         "--seed", "0xF1C5", "--output", str(out_file)],
        capsys,
    )
    assert code == 0
    assert out_file.read_text() == (FIXTURES / "nn_report.csv").read_text()
    assert out.strip() == (FIXTURES / "nn_metadata.json").read_text().strip()


def test_nn_thread_flag_keeps_output_identical(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["nn", "--red", str(FIXTURES / "nn_red.csv"),
            "--blue", str(FIXTURES / "nn_blue.csv"), "--seed", "5"]
    code1, _, _ = run_cli(base + ["--output", str(a)], capsys)
    code2, _, _ = run_cli(["--threads", "4"] + base + ["--output", str(b)], capsys)
    assert code1 == code2 == 0
    assert a.read_text() == b.read_text()


def test_maxsat_subcommand(capsys, tmp_path):
    cnf = tmp_path / "f.cnf"
    cnf.write_text("p cnf 4 4\n1 2 0\n-1 3 0\n-2 -3 0\n4 0\n")
    code, out, _ = run_cli(["maxsat", "--input", str(cnf), "--k", "2", "--seed", "3"], capsys)
    assert code == 0
    payload = json.loads(out.strip())
    assert payload["optimum"] == 4
    assert len(payload["assignment"]) == 4


def test_mst_subcommand(capsys, tmp_path):
    pts = tmp_path / "pts.csv"
    pts.write_text("d=2,u=64\n0,0\n0,5\n10,5\n")
    code, out, _ = run_cli(["mst", "--input", str(pts), "--seed", "2"], capsys)
    assert code == 0
    assert "total,15.0" in out


def test_selftest_passes(capsys):
    code, out, _ = run_cli(["selftest"], capsys)
    assert code == 0
    assert "FAIL" not in out


def test_bench_single_row(capsys):
    code, out, _ = run_cli(["bench", "--d", "8", "--sizes", "16", "--seed", "2"], capsys)
    assert code == 0
    lines = [ln for ln in out.splitlines() if ln and not ln.startswith("{")]
    assert lines[0] == "n,t_poly,t_brute"
    assert lines[1].startswith("16,")


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "threshpoly.cli"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 1  # no subcommand is a usage error
