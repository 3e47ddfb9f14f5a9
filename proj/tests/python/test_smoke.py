import json
import math
import os
import subprocess

import jsonschema
import pytest

import chernoff

SCHEMA_PATH = os.environ.get(
    "CHERNOFF_SCHEMA",
    os.path.join(os.path.dirname(__file__), "..", "..", "schemas", "run_report.schema.json"),
)


@pytest.fixture(scope="module")
def schema():
    with open(SCHEMA_PATH) as f:
        s = json.load(f)
    jsonschema.Draft202012Validator.check_schema(s)
    return s


def test_version():
    assert chernoff.__version__ == "0.1.0"


def test_example1_lp():
    env = chernoff.example1()
    assert env["means"] == [[1.0, 0.001, 0.0], [1.0, 1.002, 0.998]]
    sol = chernoff.solve_verification_lp(env["means"], 0)
    assert sol["probs"] == pytest.approx([1.0, 0.0], abs=1e-9)
    assert sol["objective"] == pytest.approx(0.998001)


def test_minimax_constants():
    env = chernoff.minimax(4, gamma=1.0, seed=2)
    c = chernoff.compute_constants(env["means"], env["true_hyp"], 0.1)
    assert c["d0"] == pytest.approx(1 / 16)
    assert c["ordering_holds"]
    assert c["exploitation"] == pytest.approx(math.log(40) * 16)


def test_min_eig_design():
    sol = chernoff.solve_min_eig_design([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]], sparsify=True)
    assert sum(sol["probs"]) == pytest.approx(1.0)
    assert sol["objective"] > 0.5 - 1e-6


def test_run_trial_noiseless():
    r = chernoff.run_trial([[1.0, 0.0], [0.0, 1.0]], true_hyp=1, policy="cs", seed=3, noise_std=0.0)
    assert r["correct"]
    assert sum(r["arm_counts"]) == r["stop_time"]
    with pytest.raises(ValueError):
        chernoff.run_trial([[1.0, 0.0]], policy="nope")


def test_run_regression():
    m = chernoff.run_regression("logistic_groups", "uniform", horizon=50, seed=1)
    assert m["checkpoints"][-1] == 50
    assert all(g >= -1e-9 for g in m["pt_gap"])


def test_reports_validate(schema):
    reports = [
        chernoff.report("test", {"trials": 10, "policies": ["cs", "top2", "eps_cs", "uniform", "batch_cs(10)"]}),
        chernoff.report("test", {"env": {"name": "minimax", "J": 5}, "trials": 5, "stopping": "sub_gaussian"}),
        chernoff.report("regress", {"trials": 3, "horizon": 40}),
        chernoff.report("design", {"env": "three_group", "hyp": 2}),
        chernoff.report("design", {"env": {"name": "relu_net", "n_points": 30}}),
        chernoff.report("diagnose", {"env": "three_group"}),
    ]
    for r in reports:
        jsonschema.validate(r, schema)


def test_config_error():
    with pytest.raises(chernoff.ConfigError):
        chernoff.run_command("test", '{"delta": 5}')


def test_cli_reports_validate(schema, tmp_path):
    cli = os.environ.get("CHERNOFF_CLI")
    if not cli:
        pytest.skip("command-line tool not available")
    out = tmp_path / "r.json"
    for args in (["test", "--trials", "5"], ["regress", "--trials", "2", "--horizon", "30"],
                 ["design", "--env", "logistic_groups"], ["diagnose", "--env", "example1"]):
        subprocess.run([cli, *args, "--out", str(out)], check=True)
        jsonschema.validate(json.loads(out.read_text()), schema)
    assert subprocess.run([cli, "test", "--delta", "0"], capture_output=True).returncode == 2
