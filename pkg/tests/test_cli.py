import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from famapprox import cli
from famapprox.family import save_manifest
from famapprox.refine import RefineConfig, derive_params


def run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out.strip(), out.err


def test_gen_planted(tmp_path, capsys):
    code, out, _ = run(capsys, "gen", "planted", "--n", 32, "--family", 256, "--opt", 0.1,
                       "--seed", 7, "--out", tmp_path)
    summary = json.loads(out)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert code == 0 and summary["members"] == 257
    assert len(manifest["members"]) == 257 and manifest["opt"] == 0.1


def test_gen_wishart(tmp_path, capsys):
    code, _, _ = run(capsys, "gen", "wishart", "--n", 16, "--seed", 1, "--out", tmp_path)
    payloads = list(tmp_path.glob("*.bin"))
    assert code == 0 and len(payloads) == 1 and payloads[0].stat().st_size == 2048


def test_gen_butterfly(tmp_path, capsys):
    code, out, _ = run(capsys, "gen", "butterfly", "--n", 16, "--out", tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert code == 0 and manifest["kind"] == "basis" and manifest["q"] == 16


def test_approx_exact_planting(tmp_path, capsys):
    run(capsys, "gen", "planted", "--n", 16, "--family", 40, "--opt", 0, "--seed", 3, "--out", tmp_path)
    planted = json.loads((tmp_path / "manifest.json").read_text())["planted_id"]
    code, out, _ = run(capsys, "approx", "--instance", tmp_path, "--algorithm", "two-sided",
                       "--cap-q", 64, "--seed", 1)
    rec = json.loads(out)
    assert code == 0 and rec["chosen"] == planted and "ratio" not in rec
    assert rec["true_error"] == 0.0 and "\n" not in out


@pytest.mark.parametrize("alg", ["one-shot", "one-sided", "two-sided", "vmv", "binary-search", "covering"])
def test_approx_record_fields(tmp_path, capsys, alg):
    run(capsys, "gen", "planted", "--n", 8, "--family", 20, "--opt", 0.1, "--seed", 2, "--out", tmp_path)
    code, out, _ = run(capsys, "approx", "--instance", tmp_path, "--algorithm", alg,
                       "--cap-l", 48, "--cap-m", 48, "--cap-q", 32)
    rec = json.loads(out)
    assert code == 0 and rec["termination"] == "returned"
    assert rec["ratio"] >= 1 - 1e-9
    assert rec["total_q"] == rec["right_q"] + rec["left_q"] + rec["vmv_q"]
    if alg == "vmv":
        assert rec["right_q"] == rec["left_q"] == 0


def test_exit_codes(tmp_path, capsys):
    run(capsys, "gen", "planted", "--n", 8, "--family", 20, "--opt", 0.5, "--seed", 2, "--out", tmp_path)
    code, out, _ = run(capsys, "approx", "--instance", tmp_path, "--algorithm", "two-sided", "--bound", 1e-5)
    assert code == 2 and json.loads(out)["termination"] == "failed"
    code, out, _ = run(capsys, "approx", "--instance", tmp_path, "--algorithm", "one-sided", "--bound", 1e-5)
    assert code == 3 and json.loads(out)["termination"] == "no-candidate"
    assert "chosen" not in json.loads(out)


def test_selector_validation(tmp_path, capsys):
    run(capsys, "gen", "butterfly", "--n", 4, "--out", tmp_path / "b")
    run(capsys, "gen", "planted", "--n", 4, "--family", 3, "--out", tmp_path / "p")
    code, _, err = run(capsys, "approx", "--instance", tmp_path / "b", "--algorithm", "two-sided")
    assert code == 1 and "finite" in err
    code, _, err = run(capsys, "approx", "--instance", tmp_path / "p", "--algorithm", "linear")
    assert code == 1 and "basis" in err
    code, _, err = run(capsys, "approx", "--instance", tmp_path / "missing", "--algorithm", "vmv")
    assert code == 1


def test_linear_on_basis_manifest(tmp_path, capsys):
    rng = np.random.default_rng(0)
    basis = rng.standard_normal((2, 8, 8))
    A = 0.7 * basis[0] - 1.2 * basis[1]
    save_manifest(tmp_path, 8, matrix=A, basis=list(basis))
    code, out, _ = run(capsys, "approx", "--instance", tmp_path, "--algorithm", "linear",
                       "--cap-l", 64, "--cap-m", 64, "--cap-q", 64)
    rec = json.loads(out)
    assert code == 0 and rec["opt"] <= 1e-10 and "ratio" not in rec
    assert len(rec["coefficients"]) == 2
    assert rec["true_error"] <= 3.5 * 0.5 * np.linalg.norm(A)
    code, out, _ = run(capsys, "approx", "--instance", tmp_path, "--algorithm", "covering",
                       "--radius", 3, "--cover-alpha", 0.5, "--cap-l", 64, "--cap-m", 64, "--cap-q", 64)
    assert code == 0 and json.loads(out)["cover_size"] > 1


BENCH_CAPS = ("--cap-l", 64, "--cap-m", 128, "--cap-q", 64)


def _bench(tmp_path, capsys, name, *extra):
    out = tmp_path / name
    code, _, _ = run(capsys, "bench", "--sizes", "16,256,4096", "--algorithms", "one-sided,two-sided",
                     "--trials", 20, "--out", out, *BENCH_CAPS, *extra)
    assert code == 0
    with open(out) as f:
        return list(csv.DictReader(f)), out


def test_bench_rows_and_structure(tmp_path, capsys):
    rows, _ = _bench(tmp_path, capsys, "a.csv")
    assert len(rows) == 120
    assert tuple(rows[0].keys()) == cli.CSV_COLUMNS
    for r in rows:
        if r["algorithm"] == "one-sided":
            assert int(r["left_q"]) == 0
        else:
            cfg = RefineConfig(cap_l=64, cap_m=128, cap_q=64)
            p = derive_params(int(r["family_size"]), cfg, "two-sided")
            limit = p.m + (math.ceil(math.sqrt(math.log2(int(r["family_size"])))) + 1) * p.l
            assert int(r["total_q"]) <= limit
    keys = [(int(r["n"]), int(r["family_size"]), r["algorithm"], int(r["seed"])) for r in rows]
    assert keys == sorted(keys)


def _strip_timing(path):
    lines = path.read_text().splitlines()
    return [",".join(line.split(",")[:-1]) for line in lines]


def test_bench_deterministic_and_parallel_safe(tmp_path, capsys):
    _, a = _bench(tmp_path, capsys, "a.csv")
    _, b = _bench(tmp_path, capsys, "b.csv")
    _, c = _bench(tmp_path, capsys, "c.csv", "--jobs", 2)
    assert _strip_timing(a) == _strip_timing(b) == _strip_timing(c)


def test_bench_rejects_unknown_algorithm(tmp_path, capsys):
    code, _, err = run(capsys, "bench", "--sizes", "16", "--algorithms", "linear", "--out", tmp_path / "x.csv")
    assert code == 1


def test_trials_validation():
    with pytest.raises(cli.CLIError):
        cli.ExperimentSpec("two-sided", RefineConfig(), trials=0)


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "famapprox", "gen", "wishart", "--n", "3",
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["n"] == 3
