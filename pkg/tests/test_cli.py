"""CLI behavior: exit codes, deterministic JSON reports, golden files, CSV."""

import io
import contextlib
import json
import subprocess
import sys
from pathlib import Path

import pytest

from darbouxlab.cli import main

REPO = Path(__file__).resolve().parent.parent
FIXTURES = Path(__file__).resolve().parent / "fixtures"


def run_cli(args):
    buf, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(err):
        code = main(args)
    return code, buf.getvalue(), err.getvalue()


@pytest.fixture(autouse=True)
def repo_cwd(monkeypatch):
    monkeypatch.chdir(REPO)


def test_missing_file_exits_2():
    code, out, err = run_cli(["darboux", "corpus/no_such_field.vf"])
    assert code == 2
    assert "cannot read" in err


def test_parse_error_exits_2(tmp_path):
    bad = tmp_path / "bad.vf"
    bad.write_text("vars: x\nparam a = 0.5\ndx/dt = a*x\n")
    code, out, err = run_cli(["darboux", str(bad)])
    assert code == 2
    assert "NonRationalLiteral" in err


@pytest.mark.parametrize("fixture, args", [
    ("darboux_restricted_y0_a0.json",
     ["darboux", "corpus/restricted_y0_a0.vf", "--degree", "2"]),
    ("expfactors_a0_b0_c2.json",
     ["expfactors", "corpus/lv3_a0_b0_c2.vf"]),
    ("integrals_a0_b0_c0.json",
     ["integrals", "corpus/lv3_a0_b0_c0.vf", "--degree", "2", "--s-bound", "0"]),
    ("formal_restricted_z0.json",
     ["formal", "corpus/restricted_z0_c2.vf", "--order", "8", "--margin", "2"]),
])
def test_golden_reports(fixture, args):
    code, out, _ = run_cli(args)
    assert code == 0
    assert out == (FIXTURES / fixture).read_text()


def test_json_output_byte_stable():
    args = ["darboux", "corpus/restricted_z0_c2.vf", "--degree", "2"]
    _, first, _ = run_cli(args)
    _, second, _ = run_cli(args)
    assert first == second
    json.loads(first)  # well-formed


def test_darboux_reference_report():
    code, out, _ = run_cli(["darboux", "corpus/restricted_y0_a0.vf",
                            "--degree", "2"])
    report = json.loads(out)
    polys = {c["poly"] for c in report["results"]["certificates"]}
    assert polys == {"x", "z", "x + 1/2"}


def test_expfactors_regimes():
    code, out, _ = run_cli(["expfactors", "corpus/lv3_a0_b0_c2.vf"])
    assert json.loads(out)["results"]["factors"] == []
    code, out, _ = run_cli(["expfactors", "corpus/lv3_a3_b3_c0.vf"])
    gs = [f["g"] for f in json.loads(out)["results"]["factors"]]
    assert "x + z" in gs and "y" in gs
    assert any("x^2" in g for g in gs)


def test_formal_promote():
    code, out, _ = run_cli(["formal", "corpus/lv3_a3_b3_c2.vf",
                            "--order", "4", "--margin", "1", "--promote", "b"])
    assert code == 0
    record = json.loads(out)["results"]["series_space"]
    assert record["basis"] == ["1", "b", "b^2", "b^3", "b^4"]
    assert record["promoted_only"] is True


def test_simulate_emits_csv(tmp_path):
    out_csv = tmp_path / "run.csv"
    code, out, _ = run_cli([
        "simulate", "corpus/lv3_a0_b0_c0.vf", "--x0", "0.5,0.5,1.0",
        "--t-end", "5", "--emit", str(out_csv), "--observe", "z"])
    assert code == 0
    report = json.loads(out)
    assert report["results"]["drift"][0]["max_abs_drift"] == 0.0
    lines = out_csv.read_text().splitlines()
    assert lines[0] == "t,x,y,z,z"
    assert len(lines) == report["results"]["n_points"] + 1


def test_corrupt_certificate_exits_1(monkeypatch):
    import darbouxlab.cli as cli
    from darbouxlab.darboux import DarbouxCert
    from darbouxlab.exactcore import parse_poly

    def forged(X, d, lattice=None):
        wrong = DarbouxCert(parse_poly("x", X.variables),
                            parse_poly("x + 1", X.variables))
        return [wrong]

    monkeypatch.setattr(cli, "search_darboux", forged)
    code, out, err = run_cli(["darboux", "corpus/restricted_z0_c2.vf"])
    assert code == 1
    assert "re-check" in err


def test_text_format():
    code, out, _ = run_cli(["darboux", "corpus/restricted_z0_c2.vf",
                            "--degree", "2", "--format", "text"])
    assert code == 0
    assert out.startswith("darbouxlab")
    assert "certificates" in out


def test_darboux_reference_file_full_run():
    # the flagship run: degree-4 search over the default lattice
    code, out, _ = run_cli(["darboux", "corpus/samardzija_greller.vf",
                            "--degree", "4"])
    assert code == 0
    report = json.loads(out)
    assert [c["poly"] for c in report["results"]["certificates"]] == \
        ["z", "y", "x"]
    assert report["results"]["note"] == "complete relative to the lattice"


def test_integrals_positive_regime():
    code, out, _ = run_cli(["integrals", "corpus/lv3_a3_b3_c2.vf",
                            "--degree", "4"])
    assert code == 0
    results = json.loads(out)["results"]
    assert results["darboux_first_integrals"] == []
    assert results["rational_obstruction"]["holds"] is True


def test_lyapunov_command():
    code, out, _ = run_cli(["lyapunov", "corpus/lv3_a0_b0_c0.vf",
                            "--x0", "0.5,0.5,1.0", "--t-end", "50",
                            "--renorm-dt", "0.5"])
    assert code == 0
    value = json.loads(out)["results"]["lyapunov_max"]
    assert abs(value) < 0.2


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "darbouxlab", "--version"],
        capture_output=True, text=True, cwd=REPO)
    assert proc.returncode == 0
    assert "darbouxlab" in proc.stdout


def test_analyze_pipeline_threads(monkeypatch):
    monkeypatch.setenv("DARBOUX_LAB_THREADS", "2")
    args = ["analyze", "corpus/restricted_z0_c2.vf", "--degree", "2",
            "--order", "4", "--margin", "1", "--s-bound", "0"]
    _, threaded, _ = run_cli(args)
    monkeypatch.setenv("DARBOUX_LAB_THREADS", "1")
    _, sequential, _ = run_cli(args)
    assert threaded == sequential
