import time

import pytest

from sindy_causal.harness import ExperimentConfig, emit_report, run_all

# criterion id -> (description, outcome); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion, description, passed, detail=""):
    ACCEPTANCE[criterion] = (description, passed, detail)


def _run_pipeline(out_dir):
    cfg = ExperimentConfig()
    timings = {}
    tables = {}
    for which in ("1", "2", "3"):
        start = time.perf_counter()
        (table,) = run_all(cfg, (which,))
        timings[which] = time.perf_counter() - start
        tables[which] = table
    docs = emit_report(list(tables.values()), "csv", out_dir)
    return {"tables": tables, "timings": timings, "csv": docs, "dir": out_dir}


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    """One full default run of experiments 1-3, timed and written to CSV."""
    return _run_pipeline(tmp_path_factory.mktemp("pipeline_a"))


@pytest.fixture(scope="session")
def pipeline_repeat(tmp_path_factory):
    return _run_pipeline(tmp_path_factory.mktemp("pipeline_b"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("abcd")), k)):
        description, passed, detail = ACCEPTANCE[key]
        status = "PASS" if passed else "FAIL"
        line = f"[{status}] criterion {key}: {description}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
