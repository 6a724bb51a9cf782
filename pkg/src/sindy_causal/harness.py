"""Experiment orchestration: clean, noise-augmented and PCMCI-constrained runs.

Each (system, simulation) pair gets its own seed derived by hashing, so
runs are independent of one another and of the set of systems requested.
"""

import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import baselines
from .baselines import BaselineParams
from .causal import CausalGraph, graph_to_constraint_mask, hamming_loss
from .dynamics import SYSTEMS, augment_with_noise, get_system, ground_truth_graph, simulate
from .sindy import ConstraintMask, coefficients_to_graph, default_library, fit, fit_constrained

logger = logging.getLogger(__name__)

SYSTEM_ORDER = ("lorenz", "mrw", "fitzhugh_nagumo", "lotka_volterra", "pendulum", "sir")
DISPLAY_NAMES = {
    "lorenz": "Lorenz",
    "mrw": "MRW",
    "fitzhugh_nagumo": "FN",
    "lotka_volterra": "LV",
    "pendulum": "Pendulum",
    "sir": "SIR",
}
BASELINE_COLUMNS = {"PCMCI": "pcmci", "LINGAM": "lingam", "GC": "gc", "CCM": "ccm"}
SINDY = "SINDy"
AUGMENTED_SINDY = "Augmented SINDy"
COMPARISON_COLUMNS = (*BASELINE_COLUMNS, SINDY)


@dataclass(frozen=True)
class ExperimentConfig:
    systems: tuple = SYSTEM_ORDER
    n_sims: int = 10
    n_steps: int = 1000
    seed_base: int = 0
    threshold: float = 0.1
    thresholds: dict = field(
        default_factory=lambda: {"mrw": 0.005, "fitzhugh_nagumo": 0.005, "sir": 0.005}
    )
    max_degree: int = 3
    include_trig: bool = True
    max_iter: int = 20
    dt: dict = field(default_factory=dict)
    baseline: BaselineParams = BaselineParams()
    noise: bool = False
    derivative_mode: str = "exact"
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "systems", tuple(self.systems))
        if self.n_sims < 1:
            raise ValueError("n_sims must be >= 1")
        for name in self.systems:
            get_system(name)
        if self.derivative_mode not in ("exact", "finite_difference"):
            raise ValueError(f"unknown derivative_mode {self.derivative_mode!r}")

    def threshold_for(self, system):
        return self.thresholds.get(system, self.threshold)

    def dt_for(self, system):
        return self.dt.get(system, SYSTEMS[system].default_dt)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "baseline" in d:
            d["baseline"] = BaselineParams(**d["baseline"])
        unknown = set(d) - {f.name for f in dataclasses.fields(cls)}
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["systems"] = list(self.systems)
        d["baseline"]["ccm_lib_sizes"] = list(self.baseline.ccm_lib_sizes)
        return d


def run_seed(seed_base, system, sim):
    """Stable 63-bit seed for one (system, simulation) pair."""
    digest = hashlib.sha256(f"{system}:{sim}".encode()).digest()
    return (int.from_bytes(digest[:8], "little") ^ seed_base) & (2**63 - 1)


@dataclass
class ResultTable:
    name: str
    rows: tuple
    cols: tuple
    runs: dict = field(default_factory=dict)  # (row, col) -> list of per-run losses
    graphs: dict = field(default_factory=dict)  # (row, col) -> list of learned graphs
    failures: list = field(default_factory=list)

    def mean(self, row, col):
        return float(np.mean(self.runs[row, col]))

    def std(self, row, col):
        values = self.runs[row, col]
        return statistics.pstdev(values) if len(values) > 1 else 0.0

    def means(self):
        return {(r, c): self.mean(r, c) for r in self.rows for c in self.cols}

    def to_csv_text(self):
        n = max(len(v) for v in self.runs.values())
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["system", "method", "mean", "std", *(f"run_{k}" for k in range(n))])
        for r in self.rows:
            for c in self.cols:
                values = self.runs[r, c]
                w.writerow([r, c, repr(self.mean(r, c)), repr(self.std(r, c)),
                            *(repr(float(v)) for v in values)])
        return buf.getvalue()

    @classmethod
    def from_csv_text(cls, name, text):
        reader = csv.reader(io.StringIO(text))
        next(reader)
        rows, cols, runs = [], [], {}
        for rec in reader:
            r, c = rec[0], rec[1]
            if r not in rows:
                rows.append(r)
            if c not in cols:
                cols.append(c)
            runs[r, c] = [float(v) for v in rec[4:] if v != ""]
        return cls(name, tuple(rows), tuple(cols), runs)

    def to_markdown(self, title=None):
        lines = [f"### {title or self.name}", ""]
        lines.append("| System | " + " | ".join(self.cols) + " |")
        lines.append("|---|" + "---:|" * len(self.cols))
        for r in self.rows:
            cells = " | ".join(f"{self.mean(r, c):.2f}" for c in self.cols)
            lines.append(f"| {DISPLAY_NAMES.get(r, r)} | {cells} |")
        return "\n".join(lines) + "\n"


# -- single runs -------------------------------------------------------------

def make_trajectory(cfg, system, sim, noise):
    spec = get_system(system)
    rng = np.random.default_rng(run_seed(cfg.seed_base, system, sim))
    ic = spec.sample_ic(rng)
    noise_seed = int(rng.integers(2**63 - 1))
    traj = simulate(spec, ic, cfg.dt_for(system), cfg.n_steps, cfg.derivative_mode)
    if noise:
        traj = augment_with_noise(traj, noise_seed)
    return traj


def _library(cfg, p):
    return default_library(p, cfg.max_degree, cfg.include_trig)


def _discover(method, traj, cfg, system, seed, full_mask=False):
    if method == SINDY:
        coefs = fit(traj, _library(cfg, traj.p), cfg.threshold_for(system), cfg.max_iter)
        return coefficients_to_graph(coefs)
    if method == AUGMENTED_SINDY:
        lib = _library(cfg, traj.p)
        if full_mask:
            mask = ConstraintMask.full(len(lib), traj.p)
        else:
            mask = graph_to_constraint_mask(baselines.pcmci(traj, cfg.baseline), lib)
        coefs = fit_constrained(traj, lib, cfg.threshold_for(system), mask, cfg.max_iter)
        return coefficients_to_graph(coefs)
    key = BASELINE_COLUMNS[method]
    if key == "lingam":
        return baselines.lingam(traj, cfg.baseline, seed=seed % 2**32)
    return baselines.METHODS[key](traj, cfg.baseline)


def run_single(cfg, system, sim, methods, noise, full_mask=False):
    """Score every method on one simulation.

    Returns ``{method: (loss, graph, failure_message_or_None)}``. A method that
    raises is scored as the empty graph.
    """
    truth = ground_truth_graph(get_system(system), augmented=noise)
    seed = run_seed(cfg.seed_base, system, sim)
    try:
        traj = make_trajectory(cfg, system, sim, noise)
    except Exception as exc:
        msg = f"{system}[{sim}] simulation: {type(exc).__name__}: {exc}"
        logger.warning(msg)
        empty = CausalGraph.empty(truth.n, truth.var_names)
        return {m: (hamming_loss(empty, truth), empty, msg) for m in methods}
    out = {}
    for method in methods:
        failure = None
        try:
            graph = _discover(method, traj, cfg, system, seed, full_mask)
        except Exception as exc:
            failure = f"{system}[{sim}] {method}: {type(exc).__name__}: {exc}"
            logger.warning(failure)
            graph = CausalGraph.empty(truth.n, truth.var_names, [failure])
        out[method] = (hamming_loss(graph, truth), graph, failure)
    return out


def _run_single_star(args):
    return run_single(*args)


def _run_table(cfg, name, methods, noise, full_mask=False):
    jobs = [(cfg, s, k, methods, noise, full_mask) for s in cfg.systems for k in range(cfg.n_sims)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            results = list(pool.map(_run_single_star, jobs))
    else:
        results = [run_single(*job) for job in jobs]
    table = ResultTable(name, cfg.systems, tuple(methods))
    # results are in (system, sim) order regardless of completion order
    for (_, system, _, _, _, _), res in zip(jobs, results):
        for method in methods:
            loss, graph, failure = res[method]
            table.runs.setdefault((system, method), []).append(loss)
            table.graphs.setdefault((system, method), []).append(graph)
            if failure:
                table.failures.append(failure)
    return table


def run_experiment1(cfg):
    """All methods on clean trajectories, scored against the system graph."""
    if cfg.noise:
        raise ValueError("experiment 1 runs without noise channels")
    return _run_table(cfg, "experiment1", COMPARISON_COLUMNS, noise=False)


def run_experiment2(cfg):
    """All methods on trajectories padded with as many Gaussian noise channels as system variables."""
    if not cfg.noise:
        raise ValueError("experiment 2 requires noise=True")
    return _run_table(cfg, "experiment2", COMPARISON_COLUMNS, noise=True)


def run_experiment3(cfg, full_mask=False):
    """SINDy constrained by the PCMCI graph.

    Uses noise-augmented data when ``cfg.noise`` is set (the default pipeline)
    and clean data otherwise. ``full_mask`` replaces the PCMCI mask by an
    all-true one.
    """
    return _run_table(cfg, "experiment3", (AUGMENTED_SINDY,), noise=cfg.noise,
                      full_mask=full_mask)


def run_all(cfg, which=("1", "2", "3")):
    tables = []
    if "1" in which:
        tables.append(run_experiment1(dataclasses.replace(cfg, noise=False)))
    if "2" in which:
        tables.append(run_experiment2(dataclasses.replace(cfg, noise=True)))
    if "3" in which:
        tables.append(run_experiment3(dataclasses.replace(cfg, noise=True)))
    return tables


# -- reporting ---------------------------------------------------------------

TITLES = {
    "experiment1": "Hamming loss for SINDy and comparison methods",
    "experiment2": "Hamming loss with noise variables",
    "experiment3": "Hamming loss for SINDy after PCMCI pre-pruning",
}


def emit_report(tables, fmt="markdown", out_dir=None):
    """Render ``tables`` and optionally write them to ``out_dir``.

    Returns ``{filename: text}``: one ``<name>.csv`` per table for ``csv``,
    a single ``report.md`` for ``markdown``.
    """
    if not tables:
        raise ValueError("no tables to report")
    if fmt == "csv":
        docs = {f"{t.name}.csv": t.to_csv_text() for t in tables}
    elif fmt == "markdown":
        docs = {"report.md": "\n".join(t.to_markdown(TITLES.get(t.name)) for t in tables)}
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        for fname, text in docs.items():
            path = os.path.join(out_dir, fname)
            try:
                with open(path, "w", newline="") as fh:
                    fh.write(text)
            except OSError as exc:
                raise OSError(f"cannot write report {path}: {exc}") from exc
    return docs


def load_tables(in_dir):
    """Read every ``experiment*.csv`` in ``in_dir`` back into tables."""
    tables = []
    for fname in sorted(os.listdir(in_dir)):
        if fname.startswith("experiment") and fname.endswith(".csv"):
            with open(os.path.join(in_dir, fname), newline="") as fh:
                tables.append(ResultTable.from_csv_text(fname[:-4], fh.read()))
    return tables
