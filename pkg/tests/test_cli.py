import csv
import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, strategies as st

from stiffspec.cli import RunConfig, main


def _rows(path):
    lines = [l for l in path.read_text().splitlines() if not l.startswith("#")]
    return list(csv.DictReader(lines))


def _ini(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_solve_demo(tmp_path):
    assert main(["solve", "--eps", "0.01", "--count", "2", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "eigenvalues.csv").read_text()
    assert "# config_sha256 = " in text and "# tol = " in text
    rows = _rows(tmp_path / "eigenvalues.csv")
    assert [float(r["mu"]) for r in rows] == pytest.approx([2.251136, 2.693584], abs=1e-6)
    assert float(rows[0]["lambda"]) == pytest.approx(0.01 * float(rows[0]["mu"]), rel=1e-15)


def test_deterministic(tmp_path):
    args = ["--eps", "0.01,0.001", "--count", "3"]
    main(["solve", *args, "--out", str(tmp_path / "a"), "--functions"])
    main(["solve", *args, "--out", str(tmp_path / "b"), "--functions"])
    for name in ("eigenvalues.csv", "eigenfunctions.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_json_format(tmp_path):
    assert main(["solve", "--eps", "0.01", "--count", "2", "--format", "json", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "eigenvalues.json").read_text())
    assert doc["columns"] == ["j", "eps", "lambda", "mu"]
    assert len(doc["meta"]["config_sha256"]) == 64


def test_usage_errors(tmp_path, capsys):
    assert main(["solve", "--count", "0"]) == 2
    bad = _ini(tmp_path, '[problem]\nk = "1/(2-3*x"\n')
    assert main(["solve", "--config", bad]) == 2
    assert "position 8" in capsys.readouterr().err
    pole = _ini(tmp_path, '[problem]\na = -1\nb = 1\nk = "1/(2+3*x)"\n', "pole.ini")
    assert main(["solve", "--config", pole]) == 2
    assert main(["solve", "--eps", "2"]) == 2
    assert main(["solve", "--config", str(tmp_path / "missing.ini")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2


def test_limit_tables(tmp_path):
    assert main(["limit", "--count", "5", "--out", str(tmp_path / "d")]) == 0
    rows = _rows(tmp_path / "d" / "limit_spectrum.csv")
    assert [r["kind"] for r in rows] == ["Double", "Double", "SimpleA2", "Double", "Double"]
    assert float(rows[0]["mu"]) == pytest.approx(2.4674011, abs=1e-7)
    assert float(rows[0]["omega"]) == pytest.approx(2.2214415, abs=1e-7)
    assert float(rows[2]["mu"]) == pytest.approx(9.8696044, abs=1e-7)

    sym = _ini(tmp_path, "[problem]\na = -2\nb = 2\n")
    assert main(["limit", "--config", sym, "--count", "1", "--out", str(tmp_path / "s")]) == 0
    (row,) = _rows(tmp_path / "s" / "limit_spectrum.csv")
    assert row["exact"] == "true" and float(row["mu"]) == pytest.approx(math.pi**2 / 16, rel=1e-12)

    disjoint = _ini(tmp_path, f"[problem]\na = -1\nb = {math.sqrt(2)!r}\n", "dj.ini")
    assert main(["limit", "--config", disjoint, "--count", "6", "--out", str(tmp_path / "j")]) == 0
    assert all(r["kind"] != "Double" for r in _rows(tmp_path / "j" / "limit_spectrum.csv"))


def test_expand_series(tmp_path, capsys):
    assert main(["expand", "--count", "2", "--order", "3", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "series.json").read_text())
    by = {s["branch"]: s for s in doc["series"]}
    assert by["Plus"]["nu"][0] == pytest.approx(2.2214415, abs=1e-7)
    assert by["Minus"]["nu"][0] == pytest.approx(-2.2214415, abs=1e-7)
    assert by["Plus"]["nu"][1] == pytest.approx(by["Minus"]["nu"][1], abs=1e-9)
    assert main(["expand", "--count", "1", "--order", "9", "--out", str(tmp_path)]) == 0
    assert "clamped" in capsys.readouterr().err
    assert json.loads((tmp_path / "series.json").read_text())["order"] == 6


def test_expand_exact(tmp_path):
    sym = _ini(tmp_path, "[problem]\na = -2\nb = 2\n")
    assert main(["expand", "--config", sym, "--count", "1", "--out", str(tmp_path)]) == 0
    (s,) = json.loads((tmp_path / "series.json").read_text())["series"]
    assert s["exact_flag"] and s["nu"] == []


def test_verify_bounds_only(tmp_path):
    cfg = _ini(tmp_path, "[run]\nstudies = bounds\njmax = 4\neps = 0.01, 0.001, 0.0001, 0.00001\n")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path), "--no-plots"]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert len(doc["bounds"]) == 16 and all(r["ok"] for r in doc["bounds"])
    assert doc["passed"]


def test_verify_fault_injection(tmp_path):
    cfg = _ini(tmp_path, "[run]\ncount = 2\norder = 2\nstudies = series, containment\n"
                         "eps = 0.01, 0.001, 0.0001, 0.00001\n[fault]\nnu1_offset = 0.05\n")
    assert main(["verify", "--config", cfg, "--out", str(tmp_path), "--no-plots"]) == 1
    doc = json.loads((tmp_path / "report.json").read_text())
    assert not doc["passed"] and "solvability" in doc["failures"][0]


def test_demo_full_suite(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "stiffspec", "demo", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stdout + proc.stderr
    for name in ("eigenvalues.csv", "limit_spectrum.csv", "series.json", "report.json", "plot_data.json",
                 "convergence.csv", "orders.png", "angle.png", "projector.png"):
        assert (tmp_path / name).exists(), name
    assert (tmp_path / "orders.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    plot = json.loads((tmp_path / "plot_data.json").read_text())
    assert plot["series"] and all("eps" in s and "errors" in s for s in plot["series"])


_expr = st.sampled_from(["1", "2+x*x", "1+x/4", "exp(x)", "2+sin(3*x)", "sqrt(2+x)"])


@given(st.floats(-3, -0.1), st.floats(0.1, 3), _expr, _expr,
       st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=6), st.integers(1, 9), st.integers(0, 6),
       st.sampled_from(["csv", "json"]), st.floats(-1, 1))
def test_config_round_trip(a, b, k, rho, eps, count, order, fmt, off):
    cfg = RunConfig(a=a, b=b, k=k, rho=rho, eps=eps, count=count, order=order, format=fmt, nu1_offset=off)
    again = RunConfig.from_string(cfg.to_string())
    assert again == cfg
    assert again.digest() == cfg.digest()
