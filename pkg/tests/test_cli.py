import json
import os

import pytest
import yaml

from ppde.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_NUMERIC, main

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def _cfg(tmp_path, data, name="c.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return str(p)


SMALL = {"generator": {"name": "heat"}, "terminal": {"name": "marginal", "params": {"shape": "cos"}},
         "cascade": {"eps": 0.5, "nx": 7, "max_levels": 3, "truncation_paths": 200}}


def test_solve_writes_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["solve", "--config", _cfg(tmp_path, SMALL), "--out", str(out)]) == 0
    res = json.loads((out / "result.json").read_text())
    run = res["runs"][0]
    assert run["theta_lower"] <= run["theta_upper"]
    assert run["global_bound"]["ok"]
    assert 0 <= run["truncation_estimate"]["probability"] <= 1
    assert (out / "convergence.csv").read_text().startswith("eps,theta_upper")
    assert "eps=0.5" in json.loads((out / "timings.json").read_text())


def test_overrides(tmp_path):
    out = tmp_path / "out"
    args = ["solve", "--config", _cfg(tmp_path, SMALL), "--out", str(out), "--eps", "0.5,0.4",
            "--levels", "none", "--grid", "5"]
    assert main(args) == 0
    runs = json.loads((out / "result.json").read_text())["runs"]
    assert [r["eps"] for r in runs] == [0.5, 0.4]
    assert all(r["nx"] == 5 and r["truncation_estimate"]["levels"] == "unbounded" for r in runs)


@pytest.mark.parametrize("data", [
    {"cascade": {"nx": 8}},
    {"cascade": {"bogus": 1}},
    {"generator": {"name": "nope"}},
    {"cascade": {"eps": -0.5}},
])
def test_invalid_config_exit_code(tmp_path, data):
    assert main(["solve", "--config", _cfg(tmp_path, data), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_unreadable_config(tmp_path):
    (tmp_path / "bad.yaml").write_text("a: [1,\n")
    assert main(["solve", "--config", str(tmp_path / "bad.yaml")]) == EXIT_CONFIG
    assert main(["solve", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG


def test_numeric_failure_exit_code(tmp_path):
    data = {"generator": {"name": "hjb"}, "terminal": {"name": "running_max", "params": {"cap": 1.0}},
            "cascade": {"eps": 0.5, "nx": 5, "max_levels": 6, "exit_time_grid": 8,
                        "node_budget": 100}}
    assert main(["solve", "--config", _cfg(tmp_path, data), "--out", str(tmp_path)]) == EXIT_NUMERIC


def test_bound_sandwich_and_negative_control(tmp_path):
    out = tmp_path / "out"
    cfg = _cfg(tmp_path, SMALL)
    assert main(["bound", "--config", cfg, "--out", str(out)]) == 0
    assert json.loads((out / "bound.json").read_text())["ok"]
    fake = tmp_path / "fake.json"
    fake.write_text(json.dumps({"runs": [{"eps": 0.5, "theta_upper": 50.0, "theta_lower": 0.0}]}))
    assert main(["bound", "--config", cfg, "--out", str(out), "--against", str(fake)]) == EXIT_FAIL


def test_snell_and_example(tmp_path):
    out = tmp_path / "out"
    assert main(["snell", "--config", os.path.join(CONFIGS, "snell.yaml"), "--out", str(out)]) == 0
    assert "Y0" in json.loads((out / "snell.json").read_text())
    assert main(["example", "degenerate", "--out", str(out)]) == 0
    ex = json.loads((out / "example.json").read_text())
    assert ex["discontinuous"] and ex["boundary_value"] == 0.0


def test_verify_writes_junit(tmp_path):
    out = tmp_path / "out"
    assert main(["verify", "--out", str(out), "--threads", "2"]) == 0
    assert (out / "junit.xml").read_text().startswith("<testsuite")
    assert "checks passed" in (out / "summary.txt").read_text()


@pytest.mark.parametrize("name", ["heat_cos.yaml", "isaacs.yaml", "running_max.yaml", "snell.yaml"])
def test_shipped_configs_validate(name):
    from ppde.cli import load_config
    assert isinstance(load_config(os.path.join(CONFIGS, name)), dict)
