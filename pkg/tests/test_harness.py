import dataclasses
import json

import numpy as np
import pytest

from sindy_causal import harness
from sindy_causal.causal import CausalGraph, hamming_loss
from sindy_causal.dynamics import get_system, ground_truth_graph
from sindy_causal.harness import (
    AUGMENTED_SINDY,
    COMPARISON_COLUMNS,
    SINDY,
    ExperimentConfig,
    ResultTable,
    emit_report,
    load_tables,
    make_trajectory,
    run_experiment1,
    run_experiment2,
    run_experiment3,
    run_seed,
)

SMALL = ExperimentConfig(systems=("pendulum", "sir"), n_sims=2, n_steps=600)


@pytest.fixture(scope="module")
def small_exp1():
    return run_experiment1(SMALL)


class TestConfig:
    def test_defaults(self):
        cfg = ExperimentConfig()
        assert cfg.systems == harness.SYSTEM_ORDER and cfg.n_sims == 10 and cfg.n_steps == 1000
        assert cfg.threshold_for("lorenz") == 0.1 and cfg.threshold_for("sir") == 0.005
        assert cfg.dt_for("lorenz") == 0.002

    def test_invalid(self):
        with pytest.raises(ValueError):
            ExperimentConfig(n_sims=0)
        with pytest.raises(ValueError):
            ExperimentConfig(systems=("brusselator",))
        with pytest.raises(ValueError):
            ExperimentConfig.from_dict({"n_simz": 3})

    def test_json_round_trip(self, tmp_path):
        cfg = ExperimentConfig(systems=("sir",), n_sims=3, dt={"sir": 0.2})
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert ExperimentConfig.from_json(path) == cfg


class TestSeeds:
    def test_stable(self):
        assert run_seed(0, "lorenz", 3) == run_seed(0, "lorenz", 3)
        assert 0 <= run_seed(5, "sir", 0) < 2**63

    def test_distinct(self):
        seeds = {run_seed(0, s, k) for s in harness.SYSTEM_ORDER for k in range(10)}
        assert len(seeds) == 60
        assert run_seed(0, "sir", 1) != run_seed(1, "sir", 1)

    def test_trajectory_varies(self):
        a = make_trajectory(SMALL, "pendulum", 0, False)
        b = make_trajectory(SMALL, "pendulum", 1, False)
        assert not np.array_equal(a.states[0], b.states[0])


class TestExperiments:
    def test_cells(self, small_exp1):
        assert small_exp1.cols == COMPARISON_COLUMNS
        for key, values in small_exp1.runs.items():
            assert len(values) == SMALL.n_sims
            assert all(0 <= v <= 1 for v in values)
            assert small_exp1.mean(*key) == pytest.approx(np.mean(values), abs=1e-12)

    def test_noise_flags(self):
        with pytest.raises(ValueError):
            run_experiment1(dataclasses.replace(SMALL, noise=True))
        with pytest.raises(ValueError):
            run_experiment2(SMALL)

    def test_deterministic(self):
        cfg = dataclasses.replace(SMALL, n_sims=1)
        a, b = run_experiment1(cfg), run_experiment1(cfg)
        assert a.to_csv_text() == b.to_csv_text()

    def test_adding_systems_keeps_runs(self, small_exp1):
        only = run_experiment1(dataclasses.replace(SMALL, systems=("sir",)))
        for col in COMPARISON_COLUMNS:
            assert only.runs["sir", col] == small_exp1.runs["sir", col]

    def test_seed_isolation(self, monkeypatch, small_exp1):
        real = harness.run_seed

        def shifted(seed_base, system, sim):
            return real(seed_base, system, sim) ^ (1 if (system, sim) == ("pendulum", 1) else 0)

        monkeypatch.setattr(harness, "run_seed", shifted)
        other = run_experiment1(SMALL)
        for (system, col), values in small_exp1.runs.items():
            for sim, value in enumerate(values):
                if (system, sim) != ("pendulum", 1):
                    assert other.runs[system, col][sim] == value
        # Hamming losses are coarse, so check that the altered run really saw new data
        before = make_trajectory(SMALL, "pendulum", 1, False)
        monkeypatch.undo()
        assert not np.array_equal(before.states, make_trajectory(SMALL, "pendulum", 1, False).states)

    def test_failure_scores_empty_graph(self, monkeypatch):
        real = harness._discover

        def flaky(method, traj, cfg, system, seed, full_mask=False):
            if method == "GC":
                raise FloatingPointError("synthetic failure")
            return real(method, traj, cfg, system, seed, full_mask)

        monkeypatch.setattr(harness, "_discover", flaky)
        table = run_experiment1(dataclasses.replace(SMALL, systems=("pendulum",)))
        truth = ground_truth_graph(get_system("pendulum"))
        assert table.runs["pendulum", "GC"] == [hamming_loss(CausalGraph.empty(2), truth)] * 2
        assert len(table.failures) == 2 and "synthetic failure" in table.failures[0]

    def test_full_mask_matches_plain_sindy(self):
        cfg = dataclasses.replace(SMALL, noise=True)
        e2 = harness._run_table(cfg, "experiment2", (SINDY,), noise=True)
        e3 = run_experiment3(cfg, full_mask=True)
        for system in cfg.systems:
            assert e3.runs[system, AUGMENTED_SINDY] == e2.runs[system, SINDY]

    def test_workers(self):
        cfg = dataclasses.replace(SMALL, systems=("pendulum",))
        serial = run_experiment1(cfg)
        parallel = run_experiment1(dataclasses.replace(cfg, workers=2))
        assert serial.to_csv_text() == parallel.to_csv_text()


def _table(rows, cols, seed=0):
    rng = np.random.default_rng(seed)
    runs = {(r, c): list(rng.random(3)) for r in rows for c in cols}
    return ResultTable("experiment1", tuple(rows), tuple(cols), runs)


class TestReport:
    def test_row_order(self, small_exp1):
        md = small_exp1.to_markdown()
        assert md.index("| Pendulum |") < md.index("| SIR |")

    def test_layout(self):
        t = _table(harness.SYSTEM_ORDER, COMPARISON_COLUMNS)
        md = emit_report([t])["report.md"]
        table_lines = [ln for ln in md.splitlines() if ln.startswith("|")]
        assert len(table_lines) == 2 + 6
        assert table_lines[0].count("|") - 2 == 5
        assert table_lines[2].startswith("| Lorenz |")

    def test_byte_identical(self):
        t = _table(["sir"], COMPARISON_COLUMNS)
        assert emit_report([t], "csv") == emit_report([t], "csv")
        assert emit_report([t]) == emit_report([t])

    def test_csv_round_trip(self, tmp_path):
        t = _table(["lorenz", "sir"], COMPARISON_COLUMNS, seed=4)
        emit_report([t], "csv", tmp_path)
        (back,) = load_tables(tmp_path)
        assert back.runs == t.runs and back.rows == t.rows and back.cols == t.cols
        assert back.to_csv_text() == t.to_csv_text()

    def test_two_decimals(self):
        t = ResultTable("experiment3", ("lorenz",), (AUGMENTED_SINDY,),
                        {("lorenz", AUGMENTED_SINDY): [0.0123, 0.0]})
        assert "| Lorenz | 0.01 |" in t.to_markdown()

    def test_errors(self, tmp_path):
        with pytest.raises(ValueError):
            emit_report([])
        with pytest.raises(ValueError):
            emit_report([_table(["sir"], ["GC"])], "html")
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(OSError, match="file"):
            emit_report([_table(["sir"], ["GC"])], "csv", blocker)


class TestNoiseDegradation:
    def test_noise_columns_mismatch(self):
        cfg = ExperimentConfig(systems=("lorenz",), noise=True)
        table = harness._run_table(cfg, "experiment2", (SINDY,), noise=True)
        graphs = table.graphs["lorenz", SINDY]
        hits = sum(g.adj[:, 3:].any() or g.adj[3:, :].any() for g in graphs)
        assert hits > len(graphs) / 2
