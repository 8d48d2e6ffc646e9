import io
import json
import subprocess
import sys

import numpy as np
import pytest

from auditcs.cli import run_cli
from auditcs.engine import save_session, create_session, SessionConfig
from auditcs.population import population_from_arrays, save_population_csv
from auditcs.sampling import SamplingStrategy
from auditcs.simulator import ScenarioConfig


@pytest.fixture
def scenario_file(tmp_path):
    sc = ScenarioConfig(
        n=12, n1_frac=0.25, trials=3, seed=5, epsilon=0.3, delta=0.1,
        strategy="propM", grid_size=101,
    )
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(sc.to_dict()))
    return path


@pytest.fixture
def population_file(tmp_path):
    rng = np.random.default_rng(8)
    pop = population_from_arrays(
        rng.uniform(1.0, 40.0, size=10), truth=rng.uniform(0.0, 0.5, size=10)
    )
    path = tmp_path / "pop.csv"
    save_population_csv(pop, path)
    return path


def test_usage_errors(capsys):
    assert run_cli([]) == 2
    assert run_cli(["simulate"]) == 2
    assert run_cli(["audit", "--population", "x.csv"]) == 2  # missing epsilon etc.
    assert run_cli(["frobnicate"]) == 2
    assert run_cli(["simulate", "--config", "a", "--out", "b", "--bogus"]) == 2
    err = capsys.readouterr().err
    assert all(line.startswith("error: usage:") for line in err.strip().splitlines())


def test_help_exits_zero(capsys):
    assert run_cli(["--help"]) == 0
    assert "subcommand" in capsys.readouterr().out


def test_simulate_writes_results(scenario_file, tmp_path, capsys):
    out_dir = tmp_path / "results"
    code = run_cli(
        ["simulate", "--config", str(scenario_file), "--out", str(out_dir)]
    )
    assert code == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "trials=3"
    assert lines[1].startswith("mean_tau=")
    assert (out_dir / "summary.json").exists()
    assert (out_dir / "trials.csv").exists()
    assert (out_dir / "widths.csv").exists()
    with open(out_dir / "summary.json") as fh:
        assert json.load(fh)["trials"] == 3


def test_simulate_flag_overrides(scenario_file, tmp_path, capsys):
    out_dir = tmp_path / "results"
    code = run_cli(
        [
            "simulate", "--config", str(scenario_file), "--out", str(out_dir),
            "--trials", "2", "--cs", "hoeffding", "--seed", "11",
        ]
    )
    assert code == 0
    assert capsys.readouterr().out.splitlines()[0] == "trials=2"
    with open(out_dir / "summary.json") as fh:
        summary = json.load(fh)
    assert summary["scenario"]["cs_family"] == "hoeffding"
    assert summary["scenario"]["seed"] == 11


def test_simulate_missing_config_file(tmp_path, capsys):
    code = run_cli(
        ["simulate", "--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]
    )
    assert code == 1
    assert capsys.readouterr().err.startswith("error: io:")


def test_audit_oracle_mode_deterministic(population_file, capsys):
    argv = [
        "audit", "--population", str(population_file),
        "--epsilon", "0.2", "--delta", "0.1",
        "--strategy", "propM", "--cs", "betting",
        "--grid", "101", "--seed", "7",
    ]
    assert run_cli(argv) == 0
    first = capsys.readouterr().out
    assert run_cli(argv) == 0
    second = capsys.readouterr().out
    assert first == second
    lines = first.splitlines()
    assert lines[0].startswith("t=1 interval=[")
    assert any(line.startswith("tau=") for line in lines)
    assert any(line.startswith("interval=") for line in lines)
    assert any(line.startswith("status=") for line in lines)
    assert lines[-1].startswith("decision=")
    assert not any(line.startswith("seed=") for line in lines)


def test_audit_prints_chosen_seed(population_file, capsys):
    argv = [
        "audit", "--population", str(population_file),
        "--epsilon", "0.5", "--delta", "0.1",
        "--strategy", "uniform", "--grid", "51",
    ]
    assert run_cli(argv) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("seed=")
    int(lines[0].split("=", 1)[1])  # parseable


def test_audit_interactive_prompts(tmp_path, capsys, monkeypatch):
    pop = population_from_arrays(np.array([5.0, 3.0, 2.0]))
    path = tmp_path / "pop.csv"
    save_population_csv(pop, path)
    monkeypatch.setattr("sys.stdin", io.StringIO("abc\n1.5\n0.4\n"))
    argv = [
        "audit", "--population", str(path),
        "--epsilon", "1.0", "--delta", "0.1",
        "--strategy", "uniform", "--grid", "51", "--seed", "3",
    ]
    assert run_cli(argv) == 0
    captured = capsys.readouterr()
    assert "enter f: " in captured.out
    assert "audit index item" in captured.out
    assert "(weight " in captured.out
    err_lines = captured.err.splitlines()
    assert err_lines[0] == "error: validation: 'abc' is not a number"
    assert err_lines[1] == "error: validation: f must lie in [0, 1]"
    assert "tau=1" in captured.out  # epsilon=1 stops after the first step


def test_audit_interactive_eof(tmp_path, capsys, monkeypatch):
    pop = population_from_arrays(np.array([5.0, 3.0]))
    path = tmp_path / "pop.csv"
    save_population_csv(pop, path)
    monkeypatch.setattr("sys.stdin", io.StringIO(""))
    argv = [
        "audit", "--population", str(path),
        "--epsilon", "0.5", "--delta", "0.1",
        "--strategy", "uniform", "--seed", "3",
    ]
    assert run_cli(argv) == 1
    assert capsys.readouterr().err.startswith("error: validation:")


def test_audit_bad_config_value(population_file, capsys):
    argv = [
        "audit", "--population", str(population_file),
        "--epsilon", "2.0", "--delta", "0.1",
        "--strategy", "propM", "--seed", "1",
    ]
    assert run_cli(argv) == 1
    assert capsys.readouterr().err.startswith("error: configuration:")


def test_audit_malformed_csv(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("id,amount\nx,3\n")
    argv = [
        "audit", "--population", str(path),
        "--epsilon", "0.2", "--delta", "0.1",
        "--strategy", "uniform", "--seed", "1",
    ]
    assert run_cli(argv) == 1
    assert capsys.readouterr().err.startswith("error: format:")


def test_replay_prints_trace(tmp_path, capsys):
    rng = np.random.default_rng(4)
    pop = population_from_arrays(
        rng.uniform(1.0, 30.0, size=8), truth=rng.uniform(0.0, 1.0, size=8)
    )
    config = SessionConfig(
        epsilon=0.3, delta=0.1, strategy=SamplingStrategy("propM"),
        grid_size=101, seed=13,
    )
    session = create_session(pop, config)
    for _ in range(3):
        indices = session.next_draw()
        session.record_observation([float(pop.truth[i]) for i in indices])
    doc_path = tmp_path / "session.json"
    doc_path.write_text(json.dumps(save_session(session)))

    assert run_cli(["replay", "--config", str(doc_path)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5  # three trace rows + tau + status
    assert lines[0].startswith("t=1 interval=[")
    assert lines[3] == f"tau={session.stopped_at or session.t}"
    assert lines[4] == f"status={session.status}"

    # Same session without an embedded population needs the CSV flag.
    slim_path = tmp_path / "slim.json"
    slim_path.write_text(json.dumps(save_session(session, include_population=False)))
    assert run_cli(["replay", "--config", str(slim_path)]) == 1
    assert capsys.readouterr().err.startswith("error: format:")
    pop_path = tmp_path / "pop.csv"
    save_population_csv(pop, pop_path)
    assert run_cli(
        ["replay", "--config", str(slim_path), "--population", str(pop_path)]
    ) == 0
    assert capsys.readouterr().out.splitlines()[:3] == lines[:3]


def test_sweep_cv_command(scenario_file, tmp_path, capsys):
    out_dir = tmp_path / "sweep"
    code = run_cli(
        [
            "sweep-cv", "--config", str(scenario_file), "--out", str(out_dir),
            "--c-values", "0.9", "--trials", "2",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("c=0.9 mean_ratio=")
    assert (out_dir / "ratios.csv").exists()
    assert (out_dir / "summary.json").exists()


def test_sweep_cv_bad_c_values(scenario_file, tmp_path, capsys):
    code = run_cli(
        [
            "sweep-cv", "--config", str(scenario_file), "--out", str(tmp_path),
            "--c-values", "0.5,zap",
        ]
    )
    assert code == 1
    assert capsys.readouterr().err.startswith("error: validation:")


def test_console_entry_point_byte_identical(population_file, tmp_path):
    argv = [
        sys.executable, "-m", "auditcs.cli",
        "audit", "--population", str(population_file),
        "--epsilon", "0.25", "--delta", "0.1",
        "--strategy", "propM", "--grid", "101", "--seed", "21",
    ]
    a = subprocess.run(argv, capture_output=True, timeout=120)
    b = subprocess.run(argv, capture_output=True, timeout=120)
    assert a.returncode == 0 and b.returncode == 0
    assert a.stdout == b.stdout
    assert a.stdout.decode().splitlines()[-1].startswith("decision=")
