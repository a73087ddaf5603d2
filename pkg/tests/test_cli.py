import json

import pytest
from click.testing import CliRunner

from app import cli

TINY_PROBLEM = {"problem": "qcqp", "qcqp": {"n": 10, "m": 2, "density": 0.3, "eig_max": 5.0}}


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


@pytest.fixture
def problem_file(tmp_path):
    path = tmp_path / "problem.json"
    path.write_text(json.dumps(TINY_PROBLEM))
    return path


def invoke(runner, *args):
    return runner.invoke(cli, ["--env", "testing", *map(str, args)])


def test_check_subset(runner):
    result = invoke(runner, "check", "--only", "scad-example-values", "--only", "level-schedules")
    assert result.exit_code == 0, result.stderr
    payload = json.loads(result.stdout)
    assert payload["status"] == "success"
    assert {c["name"] for c in payload["data"]} == {"scad-example-values", "level-schedules"}
    assert "✅" in result.stderr


def test_solve_is_reproducible(runner, problem_file, tmp_path):
    trace = tmp_path / "trace.csv"
    args = ("solve", problem_file, "--K", 5, "--seed", 2, "--out", trace)
    first, second = invoke(runner, *args), invoke(runner, *args)
    assert first.exit_code == 0, first.stdout
    assert first.stdout == second.stdout
    data = json.loads(first.stdout)["data"]
    assert data["K"] == 5 and data["seed"] == 2 and data["subsolver"] == "ipm"
    assert data["feasible"] is True
    assert data["kkt"]["type"] == "I"
    assert data["trace"] == str(trace)
    assert len(trace.read_text().splitlines()) == 6


def test_solve_uses_config_defaults(runner, problem_file):
    result = invoke(runner, "solve", problem_file, "--method", "lcpg-inexact")
    assert result.exit_code == 0, result.stdout
    data = json.loads(result.stdout)["data"]
    assert data["K"] == 20
    assert data["subsolver"] == "ipm"
    assert data["kkt"]["type"] == "II"
    assert data["trace"] is None

    override = invoke(runner, "solve", problem_file, "--method", "lcpg-inexact", "--subsolver", "pd",
                      "--K", 3)
    assert override.exit_code == 0, override.stdout
    assert json.loads(override.stdout)["data"]["subsolver"] == "pd"


def test_solve_reports_bad_problem_files(runner, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({**TINY_PROBLEM, "bogus": 1}))
    result = invoke(runner, "solve", path)
    assert result.exit_code == 1
    payload = json.loads(result.stdout)
    assert payload["status"] == "error" and "bogus" in payload["message"]
    assert "❌" in result.stderr


def test_plot_from_solve_traces(runner, problem_file, tmp_path):
    for method in ("lcpg", "lcpg-inexact"):
        out = tmp_path / f"{method}.csv"
        assert invoke(runner, "solve", problem_file, "--method", method, "--K", 4,
                      "--out", out).exit_code == 0
    target = tmp_path / "plot.csv"
    result = invoke(runner, "plot", tmp_path / "lcpg.csv", tmp_path / "lcpg-inexact.csv",
                    "--out", target)
    assert result.exit_code == 0, result.stdout
    data = json.loads(result.stdout)["data"]
    assert data["rows"] == 8 and data["series"] == ["lcpg", "lcpg-inexact"]
    assert target.read_text().startswith("series,x,y\n")

    missing_n = invoke(runner, "plot", tmp_path / "lcpg.csv", "--x", "passes", "--out", target)
    assert missing_n.exit_code == 1


def test_bench_writes_results(runner, tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"experiment_id": "cli", "methods": ["lcpg", "lcspg"], "seeds": 1,
                                "K": 3, "qcqp": TINY_PROBLEM["qcqp"]}))
    result = invoke(runner, "bench", "qcqp", spec, "--out-dir", tmp_path / "bench", "--quiet")
    assert result.exit_code == 0, result.stdout
    data = json.loads(result.stdout)["data"]
    assert data["runs"] == 2 and data["failed"] == 1
    assert (tmp_path / "bench" / "cli_results.csv").exists()
    assert (tmp_path / "bench" / "cli_lcpg_seed0_trace.csv").exists()
    assert "⚠️" in result.stderr
