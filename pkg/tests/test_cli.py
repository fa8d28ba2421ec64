import io
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import gex
from lqgne.cli import run
from lqgne.io import save_game


def _run(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def gex_file(tmp_path):
    p = tmp_path / "gex.json"
    save_game(gex(), p)
    return p


def test_solve_gex(gex_file, tmp_path):
    sol = tmp_path / "sol.json"
    code, out, _ = _run(["solve", "--input", str(gex_file), "--solver", "goldnash", "--out", str(sol)])
    assert code == 0
    assert "status optimal" in out
    vals = {k.strip(): v for k, v in (l.split("=", 1) for l in out.splitlines() if "=" in l and "[" in l)}
    assert np.allclose(json.loads(vals["x"]), [1 / 6, 1 / 3], atol=1e-15)
    assert np.allclose(json.loads(vals["lambda"]), [1 / 3], atol=1e-15)
    first = vals["x"].strip(" []").split(",")[0]
    assert len(first.replace("0.", "", 1).lstrip("0")) == 17
    doc = json.loads(sol.read_text())
    assert np.allclose(doc["x"], [1 / 6, 1 / 3])
    code, out, _ = _run(["certify", "--input", str(gex_file), "--solution", str(sol)])
    assert code == 0 and "certified (tol 1e-08): yes" in out


def test_solve_all_prints_disagreement(gex_file):
    code, out, _ = _run(["solve", "--input", str(gex_file), "--solver", "all"])
    assert code == 0
    assert "solver lemke: --" in out  # no lower bounds in the file
    assert "max disagreement" in out


def test_gen_solve_certify_round_trip(tmp_path):
    for preset in ("paper", "paper-eq"):
        for seed in range(3):
            inst, sol = tmp_path / f"{preset}{seed}.json", tmp_path / f"s{preset}{seed}.json"
            assert _run(["gen", "--preset", preset, "--agents", "3", "--seed", str(seed), "--out", str(inst)])[0] == 0
            assert _run(["solve", "--input", str(inst), "--out", str(sol)])[0] == 0
            code, out, _ = _run(["certify", "--input", str(inst), "--solution", str(sol), "--tol", "1e-8"])
            assert code == 0 and "yes" in out


def test_gen_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        _run(["gen", "--agents", "4", "--seed", "9", "--out", str(p)])
    assert a.read_bytes() == b.read_bytes()


def test_bench_command(tmp_path):
    out_csv, summ = tmp_path / "t.csv", tmp_path / "s.csv"
    code, out, _ = _run(["bench", "--preset", "paper", "--agents", "2,3,5", "--trials", "10", "--seed", "42",
                         "--out", str(out_csv), "--summary", str(summ), "--serial"])
    assert code == 0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "N,n,m,q,solver,trial,seed,status,wall_ms,iterations,kkt_resid"
    assert len(lines) == 1 + 3 * 10 * 3
    assert all(l.split(",")[7] == "optimal" for l in lines[1:])
    assert len(summ.read_text().splitlines()) == 4


def test_bench_no_timing_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    _run(["bench", "--agents", "2,3", "--trials", "3", "--out", str(a), "--no-timing", "--serial"])
    _run(["bench", "--agents", "2,3", "--trials", "3", "--out", str(b), "--no-timing"])
    assert a.read_bytes() == b.read_bytes()


def test_mpc_command(tmp_path):
    trace = tmp_path / "trace.csv"
    code, out, _ = _run(["mpc", "--horizon", "10", "--steps", "40", "--solver", "goldnash", "--out", str(trace)])
    assert code == 0 and "40/40 steps optimal" in out
    rows = trace.read_text().splitlines()
    assert len(rows) == 42 and all(r.split(",")[1] == "optimal" for r in rows[2:])


def test_bad_input_exit_codes(tmp_path):
    assert _run(["solve", "--input", str(tmp_path / "missing.json")])[0] == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert _run(["solve", "--input", str(bad)])[0] == 1
    assert _run(["frobnicate"])[0] == 1
    assert _run(["bench", "--agents", "2,x", "--out", str(tmp_path / "o.csv")])[0] == 1
    assert _run(["solve", "--input", str(bad), "--eps", "-1"])[0] == 1


def test_primal_lemke_on_equality_game_is_bad_input(tmp_path):
    p = tmp_path / "eq.json"
    save_game(gex(E=[[1.0, -1.0]], f=[0.0]), p)
    code, _, err = _run(["solve", "--input", str(p), "--solver", "lemke"])
    assert code == 1 and "does not apply" in err


def test_internal_error_exit_code(gex_file, monkeypatch):
    import lqgne.cli as cli

    def broken(*a, **k):
        raise RuntimeError("kaput")

    monkeypatch.setattr(cli, "run_solver", broken)
    code, _, err = _run(["solve", "--input", str(gex_file)])
    assert code == 2 and "internal error" in err


def test_module_entry_point(gex_file):
    proc = subprocess.run([sys.executable, "-m", "lqgne", "solve", "--input", str(gex_file)],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "status optimal" in proc.stdout
