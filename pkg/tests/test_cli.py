import json

import pytest

from mtem.cli import RunConfig, main, parse_config, serialize_config
from mtem.errors import ConfigError

INLINE = {
    "drift": [[-2.0, 1, 0], [0.5, 0, 1], [-1.0, 3, 0], [-1.0, 1, 4]],
    "diffusion": [[2.0, 2, 4], [0.5, 0, 2], [2.0, 4, 0]],
    "lipschitz": [[5.0, 4], [10.0, 0]],
}


def _run(tmp_path, *argv):
    return main([*argv, "--out", str(tmp_path), "--quiet"])


def _write(tmp_path, doc):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(doc))
    return str(p)


# parsing --------------------------------------------------------------------

def test_named_passthrough():
    cfg = parse_config('{"example":"example1","seeds":10,"out":"run1"}')
    assert cfg.example == "example1" and cfg.n_paths == 10 and cfg.out == "run1"
    assert cfg.epsilon == "midpoint" and cfg.dt is None


@pytest.mark.parametrize("text", [
    '{"example":"example2","grid":{"dt":0.025,"steps":40},"analysis":{"C":[0.1,0.2]}}',
    json.dumps({"inline": {**INLINE, "lambda1": 3.5, "lambda2": 1.0},
                "delay": {"kind": "pantograph", "q": 0.25}, "history": 2.0,
                "output": {"dir": "x", "formats": "both"}, "analysis": {"epsilon": 0.01}}),
])
def test_round_trip(text):
    cfg = parse_config(text)
    assert parse_config(serialize_config(cfg)) == cfg


def test_bad_dt_suggests_alternatives():
    with pytest.raises(ConfigError) as info:
        parse_config('{"example":"example1","grid":{"dt":0.3}}')
    assert "[0.25, 0.2, 0.125, 0.1]" in str(info.value)


@pytest.mark.parametrize("text,fragment", [
    ('{"example":"example1","colour":1}', "unknown key 'colour'"),
    ('{"example":"example1","grid":{"dx":1}}', "unknown key 'dx'"),
    ('{"example":"example1",\n "seeds": }', "line 2, column"),
    ('{}', "exactly one"),
    ('{"example":"example3"}', "unknown example"),
    ('{"example":"example1","ensemble":{"n_paths":0}}', "n_paths >= 1"),
    ('{"example":"example1","grid":{"steps":0}}', "steps >= 1"),
    ('{"example":"example1","grid":{"dt":-1}}', "dt > 0"),
    ('{"example":"example1","analysis":{"epsilon":"big"}}', "epsilon"),
    ('{"example":"example1","schema":"mtem/9"}', "schema"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


# commands -------------------------------------------------------------------

def test_certify_example1(tmp_path):
    assert _run(tmp_path, "certify", "example1") == 0
    doc = json.loads((tmp_path / "certificate.json").read_text())
    assert doc["scheme"]["epsilon"] == 0.0625
    assert abs(doc["scheme"]["residual"]) <= 1e-10
    assert doc["metadata"]["config"]["example"] == "example1"


def test_certify_example2_closed_form(tmp_path):
    assert _run(tmp_path, "certify", "--example", "example2", "--epsilon", "0.05") == 0
    doc = json.loads((tmp_path / "certificate.json").read_text())
    assert doc["scheme"]["c_tilde0"] == pytest.approx(0.3, abs=1e-15)


def test_reproduce_example2(tmp_path):
    assert _run(tmp_path, "reproduce", "example2") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["passed"] and report["n_seeds"] == 10
    assert (tmp_path / "report.txt").read_text().startswith("experiment example2")


def test_reproduce_exit_is_verdict(tmp_path):
    # at t = 0.5 the exponential statistic is far from 0
    assert _run(tmp_path, "reproduce", "example1", "--steps", "5") == 1
    report = json.loads((tmp_path / "report.json").read_text())
    assert not report["passed"]


def test_check_example1(tmp_path):
    assert _run(tmp_path, "check", "example1") == 0
    doc = json.loads((tmp_path / "validation.json").read_text())
    assert doc["counting"]["holds"] and doc["truncation_compatibility"]["verdict"] == "decreasing"


def test_simulate_outputs(tmp_path):
    assert _run(tmp_path, "simulate", "example1", "--steps", "50", "--paths", "3",
                "--format", "both") == 0
    for name in ("paths.csv", "paths.json", "decay.csv", "mean_square.csv", "metadata.json"):
        assert (tmp_path / name).exists()
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["master_seed"] == 20190101 and meta["config"]["grid"]["steps"] == 50
    rows = (tmp_path / "paths.csv").read_text().strip().split("\n")
    assert len(rows) == 1 + 3 * (10 + 51)


def test_simulate_zero_history(tmp_path):
    cfg = _write(tmp_path, {"inline": {**INLINE, "lambda1": 3.5, "lambda2": 1.0},
                            "delay": {"kind": "constant", "tau": 1.0}, "history": 0.0,
                            "grid": {"dt": 0.1, "steps": 100}, "ensemble": {"n_paths": 4}})
    assert _run(tmp_path, "simulate", "--config", cfg) == 0
    rows = (tmp_path / "paths.csv").read_text().strip().split("\n")[1:]
    assert rows and all(float(r.split(",")[-1]) == 0.0 for r in rows)


def test_inline_nonpositive_margin_warns(tmp_path):
    cfg = _write(tmp_path, {"inline": {**INLINE, "lambda1": 1.0, "lambda2": 1.0, "eta": 0.5},
                            "grid": {"steps": 20}, "ensemble": {"n_paths": 2}})
    assert _run(tmp_path, "simulate", "--config", cfg) == 0
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert meta["warnings"][0]["finding"] == "stability margin non-positive"
    assert meta["warnings"][0]["value"] == pytest.approx(-2.0)


def test_errors_are_machine_readable(tmp_path, capsys):
    assert _run(tmp_path, "simulate", "example1", "--dt", "0.3") == 2
    record = json.loads(capsys.readouterr().err.strip())
    assert record["error"] and "0.25" in record["message"]
    cfg = tmp_path / "bad.json"
    cfg.write_text("{nope")
    assert main(["certify", "--config", str(cfg)]) == 2
    assert "line 1" in json.loads(capsys.readouterr().err.strip())["message"]


def test_certify_epsilon_outside_window(tmp_path):
    assert _run(tmp_path, "certify", "example1", "--epsilon", "0.125") == 2
    assert "window" in json.loads((tmp_path / "error.json").read_text())["message"]


def test_defaults_echoed():
    d = RunConfig(example="example1").to_dict()
    assert d["schema"] == "mtem/1" and d["ensemble"]["master_seed"] == 20190101
