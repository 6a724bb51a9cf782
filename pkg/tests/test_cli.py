import json

import pytest

from sindy_causal.causal import CausalGraph
from sindy_causal.cli import EXIT_RUNTIME, EXIT_USAGE, main
from sindy_causal.dynamics import Trajectory
from sindy_causal.sindy import read_coefficients_csv


@pytest.fixture
def lorenz_csv(tmp_path):
    path = tmp_path / "lorenz.csv"
    assert main(["simulate", "--system", "lorenz", "--seed", "1", "--out", str(path)]) == 0
    return path


def test_simulate(lorenz_csv):
    traj = Trajectory.from_csv(lorenz_csv)
    assert traj.m == 1000 and traj.var_names == ("x", "y", "z")
    assert traj.dt == pytest.approx(0.002)


def test_simulate_noise(tmp_path):
    path = tmp_path / "p.csv"
    assert main(["simulate", "--system", "pendulum", "--steps", "300", "--noise",
                 "--out", str(path)]) == 0
    traj = Trajectory.from_csv(path)
    assert traj.p == 4 and traj.n_system == 2


def test_fit(lorenz_csv, tmp_path, capsys):
    out = tmp_path / "coefs.csv"
    assert main(["fit", "--traj", str(lorenz_csv), "--degree", "2", "--out", str(out)]) == 0
    assert "dx/dt = -10 x +10 y" in capsys.readouterr().out
    labels, names, xi = read_coefficients_csv(out)
    assert len(labels) == 10 and names == ("x", "y", "z")


@pytest.mark.parametrize("method", ["sindy", "pcmci", "lingam", "gc", "ccm"])
def test_discover(lorenz_csv, tmp_path, method):
    out = tmp_path / "g.csv"
    assert main(["discover", "--traj", str(lorenz_csv), "--method", method,
                 "--out", str(out)]) == 0
    g = CausalGraph.from_csv(out)
    assert g.n == 3


def test_discover_config(lorenz_csv, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"baseline": {"granger_max_lag": 1}}))
    assert main(["discover", "--traj", str(lorenz_csv), "--method", "gc",
                 "--config", str(cfg)]) == 0
    assert "->" in capsys.readouterr().out


def test_experiment_and_report(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"systems": ["pendulum"], "n_sims": 2, "n_steps": 500}))
    out_dir = tmp_path / "out"
    assert main(["experiment", "--which", "all", "--config", str(cfg),
                 "--out-dir", str(out_dir)]) == 0
    printed = capsys.readouterr().out
    assert "| Pendulum |" in printed
    assert sorted(p.name for p in out_dir.iterdir()) == [
        "experiment1.csv", "experiment2.csv", "experiment3.csv", "report.md"]
    assert main(["report", "--in-dir", str(out_dir)]) == 0
    assert capsys.readouterr().out == (out_dir / "report.md").read_text()
    assert main(["report", "--in-dir", str(out_dir), "--format", "csv"]) == 0
    assert "# experiment1.csv" in capsys.readouterr().out


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as info:
        main(["simulate"])
    assert info.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        main(["discover", "--traj", "x.csv", "--method", "magic"])
    assert info.value.code == EXIT_USAGE


def test_runtime_errors(tmp_path, capsys):
    assert main(["simulate", "--system", "duffing", "--out", str(tmp_path / "a.csv")]) == EXIT_RUNTIME
    assert main(["fit", "--traj", str(tmp_path / "missing.csv")]) == EXIT_RUNTIME
    assert main(["report", "--in-dir", str(tmp_path)]) == EXIT_RUNTIME
    assert main(["simulate", "--system", "mrw", "--dt", "-1",
                 "--out", str(tmp_path / "b.csv")]) == EXIT_RUNTIME
    assert "error:" in capsys.readouterr().err
