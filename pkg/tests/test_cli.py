import json
from pathlib import Path

import pytest

from careerwage import WagePolicy, example_environment
from careerwage.cli import main

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


@pytest.fixture
def env_file(tmp_path):
    path = tmp_path / "env.json"
    path.write_text(json.dumps(example_environment().to_dict()))
    return path


def run(*argv):
    return main([str(a) for a in argv])


def test_analyze(env_file, tmp_path, capsys):
    out = tmp_path / "a"
    assert run("--command", "analyze", "--env", env_file, "--out", out) == 0
    text = capsys.readouterr().out
    assert "w_low=0.583333333" in text and "w_high=1" in text
    rep = json.loads((out / "analyze.json").read_text())
    assert rep["strategic_uncertainty"] is True and rep["complementarity"] == "Complementary"
    assert (out / "d_samples.csv").read_text().startswith("# seed=0\nq,D\n")
    assert "d_samples.csv" in json.loads((out / "schema.json").read_text())["files"]


def test_solve_then_verify(env_file, tmp_path, capsys):
    out = tmp_path / "s"
    assert run("--command", "solve", "--env", env_file, "--out", out) == 0
    pol = WagePolicy.from_json((out / "policy.json").read_text())
    assert pol.support_bounds == pytest.approx((7 / 12, 1.0), abs=1e-9)
    assert json.loads((out / "audit.json").read_text())["audit_passed"] is True
    code = run("--command", "verify", "--env", env_file, "--policy", out / "policy.json",
               "--out", out, "--grid", 4000)
    assert code == 0
    assert "fully_implements=true" in capsys.readouterr().out


def test_verify_rejects_pr_wage(env_file, tmp_path, capsys):
    pol = tmp_path / "pr.json"
    pol.write_text(WagePolicy.degenerate(7 / 12 - 1e-3).to_json())
    code = run("--command", "verify", "--env", env_file, "--policy", pol, "--out", tmp_path,
               "--grid", 2000)
    assert code == 1
    v = json.loads((tmp_path / "verdict.json").read_text())
    assert not v["fully_implements"] and v["witnesses"]


def test_enumerate(env_file, tmp_path):
    pol = tmp_path / "pr.json"
    pol.write_text(WagePolicy.degenerate(7 / 12).to_json())
    assert run("--command", "enumerate", "--env", env_file, "--policy", pol, "--out", tmp_path) == 0
    recs = json.loads((tmp_path / "records.json").read_text())["records"]
    assert sorted(r["classification"] for r in recs) == ["FullShirk", "FullWork"]


def test_solve_informed_configs(tmp_path, capsys):
    assert run("--command", "solve-informed", "--env", CONFIGS / "example_informed.json",
               "--out", tmp_path) == 0
    text = capsys.readouterr().out
    assert "w_low_tilde=0.783333333" in text and "audit_passed=true" in text
    assert run("--command", "solve-informed", "--env", CONFIGS / "example_informed.json",
               "--target-q", "0.4,0.8", "--out", tmp_path / "q") == 0
    assert run("--command", "verify", "--env", CONFIGS / "example_informed.json",
               "--target-q", "0.4,0.8", "--policy", tmp_path / "q" / "policy.json",
               "--out", tmp_path / "q", "--grid", 4000) == 0


def test_not_implementable_exit(tmp_path, capsys):
    code = run("--command", "solve-informed", "--env", CONFIGS / "example_informed.json",
               "--target-q", "0,0.3", "--out", tmp_path)
    assert code == 1
    assert "not implementable" in capsys.readouterr().out


def test_three_type_assumption_gate(tmp_path, capsys):
    env = CONFIGS / "three_type.json"
    assert run("--command", "solve-informed", "--env", env, "--out", tmp_path) == 1
    assert "assumptions failed: a1" in capsys.readouterr().out
    assert run("--command", "solve-informed", "--env", env, "--out", tmp_path,
               "--skip-assumptions") == 0


def test_sweep(env_file, tmp_path):
    assert run("--command", "sweep", "--env", env_file, "--axis", "discount",
               "--points", "0.5,1", "--out", tmp_path) == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "# seed=0" and lines[1].startswith("axis,value")


def test_deterministic(tmp_path):
    outs = []
    for name in ("r1", "r2"):
        assert run("--command", "solve", "--env", "random:zigzag", "--seed", 7,
                   "--out", tmp_path / name) == 0
        outs.append((tmp_path / name / "policy.json").read_bytes())
    assert outs[0] == outs[1]


def test_config_file(env_file, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "analyze", "env": str(env_file),
                               "out": str(tmp_path / "c")}))
    assert run("--config", cfg) == 0
    assert (tmp_path / "c" / "analyze.json").exists()


def test_schema_error_names_field(tmp_path, capsys):
    doc = example_environment().to_dict()
    doc["prior"] = [0.7, 0.7]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert run("--command", "analyze", "--env", path, "--out", tmp_path) == 2
    assert "'prior'" in capsys.readouterr().err


@pytest.mark.parametrize("extra", [
    ["--grid", "10"], ["--tol", "0"], ["--eps", "-1"], [],
])
def test_usage_errors(env_file, tmp_path, extra):
    argv = ["--env", env_file, "--out", tmp_path] + extra
    if extra:
        argv = ["--command", "analyze"] + argv
    assert run(*argv) == 2


def test_missing_policy(env_file, tmp_path):
    assert run("--command", "verify", "--env", env_file, "--out", tmp_path) == 2
