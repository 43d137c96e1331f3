import json

import pytest

from loggap.cli import main


def run(args):
    return main(args)


def test_bounds_listing(tmp_path):
    out = tmp_path / "b.json"
    assert run(["bounds", "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["command"] == "bounds"
    assert len(report["formulas"]) == 12
    assert "config" in report


def test_bounds_evaluation(tmp_path):
    out = tmp_path / "b.json"
    code = run(["bounds", "--formula", "tensorization",
                "--params", '{"component_cps": [1.0, 2.0]}',
                "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["bound"]["value"] == 2.0


def test_unknown_formula_is_operational_error():
    assert run(["bounds", "--formula", "bogus"]) == 1


def test_spectrum_report_and_csv(tmp_path):
    out = tmp_path / "s.json"
    csv_path = tmp_path / "s.csv"
    measure = '{"dim":2,"family":{"kind":"gaussian","cov":1.0}}'
    code = run(["spectrum", "--measure", measure, "--resolution", "48",
                "--k", "3", "--out", str(out), "--csv", str(csv_path)])
    assert code == 0
    report = json.loads(out.read_text())
    lam = report["spectrum"]["eigenvalues"]
    assert lam[1] == pytest.approx(1.0, rel=0.02)
    header = csv_path.read_text().splitlines()[0]
    assert header == "index,eigenvalue,residual,parity"
    # the resolved configuration is embedded for reproducibility
    assert report["config"]["resolution"] == 48
    assert report["config"]["seed"] == 0


def test_interlace_exit_code(tmp_path):
    measure = '{"dim":2,"family":{"kind":"nu_n_Q","Q":[[0.4,0.1],[0.1,0.3]]}}'
    out = tmp_path / "i.json"
    assert run(["interlace", "--measure", measure, "--resolution", "48",
                "--out", str(out)]) == 0
    assert json.loads(out.read_text())["interlace"]["holds"]


def test_missing_measure_is_operational_error():
    assert run(["spectrum"]) == 1


def test_bad_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("not json")
    assert run(["bounds", "--config", str(cfg)]) == 1


def test_config_overrides_flags(tmp_path, caplog):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"points": 7}')
    out = tmp_path / "a.json"
    code = run(["alpha", "--family", "laplace", "--points", "50",
                "--config", str(cfg), "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["config"]["points"] == 7
    assert report["profile_rows"] == 7
    assert any("overrides" in r.message for r in caplog.records)


def test_alpha_profile_csv(tmp_path):
    csv_path = tmp_path / "a.csv"
    code = run(["alpha", "--family", "nu_p", "--p", "1.5",
                "--points", "20", "--csv", str(csv_path)])
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "t,alpha,bound"
    assert len(lines) == 21


def test_sweep_csv(tmp_path):
    csv_path = tmp_path / "sw.csv"
    out = tmp_path / "sw.json"
    code = run(["sweep", "--count", "2", "--resolution", "48",
                "--csv", str(csv_path), "--out", str(out)])
    assert code == 0
    lines = csv_path.read_text().splitlines()
    assert lines[0].startswith("index,q00,q01,q11,lambda1,cp")
    assert len(lines) == 3
    report = json.loads(out.read_text())
    assert report["all_lambda1_odd"] and report["all_interlace"]


def test_threads_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("LOGGAP_THREADS", "2")
    out = tmp_path / "b.json"
    assert run(["bounds", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["config"]["threads"] == 2
