import json

import pytest

from objpert.cli import main
from objpert.oracles import read_mps


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def test_bounds_objdisc_prints_two(capsys):
    code = main(["bounds", "--mechanism", "objdisc", "--G", "1", "--D", "1", "--d", "1", "--tau", "1",
                 "--eps", "1", "--delta", "0.3678794", "--beta", "1.471518", "--n", "14"])
    assert code == 0
    assert capsys.readouterr().out.strip() == "2.0"


def test_bounds_rspm_is_labeled(capsys):
    assert main(["bounds", "--mechanism", "rspm", "--m-sep", "4", "--eps", "1", "--delta", "0.01", "--n", "100"]) == 0
    assert capsys.readouterr().out.strip().endswith("(up to constants)")


def test_bounds_missing_argument_is_usage_error(capsys):
    assert main(["bounds", "--mechanism", "objdisc", "--G", "1"]) == 1
    assert "--D" in capsys.readouterr().err


def test_usage_errors_exit_one(capsys):
    assert main(["run", "--config", "missing.cfg"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["synth", "--n", "3", "--d", "2", "--bogus"]) == 1
    assert "usage" in capsys.readouterr().err


def test_runtime_error_exits_two(tmp_path):
    assert main(["synth", "--n", "5", "--d", "2", "--margin", "2"]) == 2


def test_synth_is_byte_identical(tmp_path):
    main(["synth", "--n", "10", "--d", "2", "--seed", "7", "--out", "a.csv"])
    main(["synth", "--n", "10", "--d", "2", "--seed", "7", "--out", "b.csv"])
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_run_with_config_and_overrides(tmp_path, capsys):
    (tmp_path / "exp.cfg").write_text("synth_n = 30\nsynth_d = 2\nepsilons = 1, 2\nreps = 2\n")
    code = main(["run", "--config", "exp.cfg", "--seed", "3", "--set", "mechanisms=objdisc,rspm",
                 "--out-dir", "res"])
    assert code == 0
    lines = (tmp_path / "res" / "runs.jsonl").read_text().splitlines()
    assert len(lines) == 8
    assert all(json.loads(l)["seed"] == 3 for l in lines)
    assert "wrote res" in capsys.readouterr().out


def test_run_rejects_bad_config_value(tmp_path):
    (tmp_path / "bad.cfg").write_text("reps = 0\n")
    assert main(["run", "--config", "bad.cfg"]) == 1


def test_audit_dp_json(tmp_path):
    assert main(["audit", "--check", "dp", "--trials", "20000", "--out", "a.json"]) == 0
    report = json.loads((tmp_path / "a.json").read_text())
    assert report["verdict"] == "pass" and report["trials"] == 20000


def test_audit_dp_sabotage_is_reported(tmp_path):
    assert main(["audit", "--check", "dp", "--sigma", "0", "--trials", "2000", "--out", "s.json"]) == 0
    assert json.loads((tmp_path / "s.json").read_text())["verdict"] == "fail"


def test_audit_other_checks(capsys):
    assert main(["audit", "--check", "mapping", "--trials", "20"]) == 0
    assert set(json.loads(capsys.readouterr().out)) == {"2GD^2/tau", "4GD^2/tau"}
    assert main(["audit", "--check", "ties", "--trials", "1000"]) == 0
    assert json.loads(capsys.readouterr().out)["tie_rate"] == 0.0
    assert main(["audit", "--check", "stability", "--trials", "2000"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["mean"] <= out["bound"]


def test_audit_config_file_supplies_defaults(tmp_path, capsys):
    (tmp_path / "a.cfg").write_text("check = ties\ntrials = 500\n")
    assert main(["audit", "--config", "a.cfg"]) == 0
    assert json.loads(capsys.readouterr().out)["trials"] == 500
    (tmp_path / "b.cfg").write_text("colour = red\n")
    assert main(["audit", "--config", "b.cfg"]) == 1


def test_ingest_and_export_mps(tmp_path, capsys):
    (tmp_path / "raw.csv").write_text("age,color,label\n30,red,yes\n41,green,no\n25,blue,no\n52,red,yes\n")
    assert main(["ingest", "--csv", "raw.csv", "--label", "label", "--positive", "yes",
                 "--categorical", "color", "--numeric", "age", "--out", "clean.csv"]) == 0
    assert json.loads(capsys.readouterr().out)["d"] == 4
    main(["synth", "--n", "6", "--d", "2", "--out", "s.csv"])
    assert main(["export-mps", "--data", "s.csv", "--eta", "0.5,-1,2", "--out", "m.mps"]) == 0
    inst = read_mps(tmp_path / "m.mps")
    assert inst.examples.n == 6 and inst.eta.tolist() == [0.5, -1.0, 2.0]
    assert main(["export-mps", "--data", "s.csv", "--mode", "weighted", "--out", "w.mps"]) == 0
    assert "X0000001" in (tmp_path / "w.mps").read_text()


def test_verify_separator(capsys):
    assert main(["verify-separator", "--d", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out == {"verdict": "pass", "size": 4, "points": 9}
    assert main(["verify-separator", "--d", "4", "--bound", "2", "--radius", "2"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] == "pass"
