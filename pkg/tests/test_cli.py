import json

import pytest

from loewner_pmp import __version__
from loewner_pmp.cli import RunConfig, execute, run
from loewner_pmp.controls import builtin_control
from loewner_pmp.errors import ValidationError


def read(path):
    return json.loads(path.read_text())


def test_schiffer_check_koebe(tmp_path):
    out = tmp_path / "s.json"
    csv = tmp_path / "s.csv"
    assert run(["schiffer-check", "--koebe", "--N", "2", "--out", str(out), "--csv", str(csv)]) == 0
    doc = read(out)
    assert doc["schema"] == 1 and doc["version"] == __version__
    assert doc["result"]["satisfied"] == {"equation": True, "positivity": True}
    assert doc["config"]["command"] == "schiffer-check"
    assert csv.read_text().startswith("theta,re_R,im_R")


def test_pmp_check_from_control_file(tmp_path):
    ctrl = tmp_path / "koebe.json"
    ctrl.write_text(builtin_control("koebe").to_json())
    out = tmp_path / "p.json"
    assert run(["pmp-check", "--control", str(ctrl), "--N", "2", "--out", str(out)]) == 0
    assert read(out)["result"]["max_gap"] < 1e-6


def test_malformed_config_fails_closed(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    assert run(["run", str(cfg)]) == 2
    assert sorted(p.name for p in tmp_path.iterdir()) == ["bad.json"]


def test_numerical_guard_exit_code(tmp_path):
    out = tmp_path / "x.json"
    assert run(["integrate", "--builtin", "koebe", "--step", "0.5", "--out", str(out)]) == 3
    assert not out.exists()


def test_validation_exit_codes(tmp_path):
    assert run(["integrate", "--builtin", "nope"]) == 2
    assert run(["limit-map"]) == 2
    assert run(["no-such-command"]) == 2
    assert run(["schiffer-check", "--koebe", "--N", "1"]) == 2
    missing = tmp_path / "missing.json"
    assert run(["pmp-check", "--control", str(missing), "--N", "2"]) == 2


def test_run_config_round_trip():
    cfg = RunConfig("optimize", {"N": 3, "pieces": 4, "constraints": {"2": [1.0, 0.0]}}, seed=5, horizon=7.0)
    again = RunConfig.from_json(cfg.to_json())
    assert again == cfg
    assert again.to_json() == cfg.to_json()
    with pytest.raises(ValidationError):
        RunConfig.from_dict(dict(cfg.to_dict(), extra=1))
    with pytest.raises(ValidationError):
        RunConfig("optimize", {"bogus": 1})
    with pytest.raises(ValidationError):
        RunConfig.from_dict(dict(cfg.to_dict(), schema=2))


def test_replay_is_byte_identical(tmp_path):
    out = tmp_path / "lm.json"
    argv = ["limit-map", "--builtin", "random:7", "--order", "6", "--out", str(out)]
    assert run(argv) == 0
    first = out.read_bytes()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(read(out)["config"]))
    assert run(["run", str(cfg)]) == 0
    assert out.read_bytes() == first


def test_sample_reachable_csv_is_deterministic(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        argv = ["sample-reachable", "--targets", "2", "--count", "200", "--seed", "3",
                "--csv", str(p), "--out", str(tmp_path / "s.json")]
        assert run(argv) == 0
    assert a.read_bytes() == b.read_bytes()
    assert read(tmp_path / "s.json")["result"]["max_abs"][0] <= 2 + 1e-6


def test_ball_sampling_targets(tmp_path):
    out = tmp_path / "b.json"
    argv = ["sample-reachable", "--dimension", "2", "--targets", "2,0", "1,1", "--count", "5",
            "--horizon", "1", "--out", str(out)]
    assert run(argv) == 0
    assert read(out)["result"]["finite"] is True


def test_optimize_and_teichmueller(tmp_path):
    out = tmp_path / "o.json"
    argv = ["optimize", "--N", "2", "--pieces", "1", "--restarts", "1", "--horizon", "3", "--out", str(out)]
    assert run(argv) == 0
    assert read(out)["result"]["best_value"] > 1.9
    out2 = tmp_path / "t.json"
    assert run(["teichmueller", "--perturbations", "0", "--out", str(out2)]) == 0
    assert read(out2)["result"]["status"] == "empty"
    assert run(["teichmueller", "--base", "rotating:1", "--perturbations", "3"]) == 2


def test_constraint_flag_parsing():
    cfg = RunConfig.from_dict({"command": "optimize", "params": {"N": 3, "constraints": {"2": [1.0, 0.0]}}})
    assert cfg.params["constraints"] == {"2": [1.0, 0.0]}
    assert run(["optimize", "--N", "3", "--constraint", "2"]) == 2


def test_threads_environment(monkeypatch):
    monkeypatch.setenv("LOEWNER_PMP_THREADS", "2")
    text, _ = execute(RunConfig("limit-map", {"builtin": "koebe"}, order=4))
    assert json.loads(text)["config"]["threads"] == 2


def test_integrate_outputs(tmp_path):
    out, csv = tmp_path / "i.json", tmp_path / "i.csv"
    assert run(["integrate", "--builtin", "koebe", "--out", str(out), "--csv", str(csv)]) == 0
    res = read(out)["result"]
    assert res["limit_map"]["coefficients"][2][0] == pytest.approx(2, abs=1e-6)
    assert len(csv.read_text().splitlines()) == 1282
