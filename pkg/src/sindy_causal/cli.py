"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 runtime or numerical error.
"""

import argparse
import logging
import sys

import numpy as np

from . import baselines
from .baselines import BaselineParams
from .dynamics import Trajectory, augment_with_noise, get_system, simulate
from .exceptions import SindyCausalError
from .harness import ExperimentConfig, emit_report, load_tables, run_all
from .sindy import coefficients_to_graph, default_library, fit

EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _cmd_simulate(args):
    spec = get_system(args.system)
    rng = np.random.default_rng(args.seed)
    ic = spec.sample_ic(rng)
    dt = args.dt if args.dt is not None else spec.default_dt
    traj = simulate(spec, ic, dt, args.steps, args.derivative_mode)
    if args.noise:
        traj = augment_with_noise(traj, int(rng.integers(2**63 - 1)))
    traj.to_csv(args.out)
    print(f"wrote {traj.m} samples x {traj.p} variables to {args.out}")


def _fit(args, traj):
    lib = default_library(traj.p, args.degree, args.trig)
    return fit(traj, lib, args.threshold)


def _cmd_fit(args):
    traj = Trajectory.from_csv(args.traj)
    coefs = _fit(args, traj)
    for line in coefs.equations():
        print(line)
    for note in coefs.warnings:
        print(f"warning: {note}", file=sys.stderr)
    if args.out:
        coefs.to_csv(args.out)


def _cmd_discover(args):
    traj = Trajectory.from_csv(args.traj)
    params = ExperimentConfig.from_json(args.config).baseline if args.config else BaselineParams()
    if args.method == "sindy":
        graph = coefficients_to_graph(_fit(args, traj))
    elif args.method == "lingam":
        graph = baselines.lingam(traj, params, seed=args.seed)
    else:
        graph = baselines.METHODS[args.method](traj, params)
    print(graph.edge_list() or "(no edges)")
    for note in graph.notes:
        print(f"note: {note}", file=sys.stderr)
    if args.out:
        graph.to_csv(args.out)


def _cmd_experiment(args):
    cfg = ExperimentConfig.from_json(args.config) if args.config else ExperimentConfig()
    which = ("1", "2", "3") if args.which == "all" else (args.which,)
    tables = run_all(cfg, which)
    emit_report(tables, "csv", args.out_dir)
    print(emit_report(tables, "markdown", args.out_dir)["report.md"])
    for t in tables:
        for failure in t.failures:
            print(f"failure: {failure}", file=sys.stderr)


def _cmd_report(args):
    tables = load_tables(args.in_dir)
    if not tables:
        raise FileNotFoundError(f"no experiment*.csv files in {args.in_dir}")
    docs = emit_report(tables, args.format)
    for name, text in docs.items():
        if len(docs) > 1:
            print(f"# {name}")
        sys.stdout.write(text)


def build_parser():
    parser = _Parser(prog="sindy-causal", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate one benchmark system to CSV")
    p.add_argument("--system", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--dt", type=float)
    p.add_argument("--noise", action="store_true", help="append Gaussian noise channels")
    p.add_argument("--derivative-mode", choices=("exact", "finite_difference"), default="exact")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_simulate)

    def sindy_opts(q):
        q.add_argument("--threshold", type=float, default=0.1)
        q.add_argument("--degree", type=int, default=3)
        q.add_argument("--trig", action="store_true")

    p = sub.add_parser("fit", help="fit SINDy coefficients to a trajectory CSV")
    p.add_argument("--traj", required=True)
    sindy_opts(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("discover", help="learn a causal graph from a trajectory CSV")
    p.add_argument("--traj", required=True)
    p.add_argument("--method", required=True, choices=("sindy", "pcmci", "lingam", "gc", "ccm"))
    p.add_argument("--config", help="JSON config; only its 'baseline' block is used")
    p.add_argument("--seed", type=int, default=0, help="FastICA seed for lingam")
    sindy_opts(p)
    p.add_argument("--out")
    p.set_defaults(func=_cmd_discover)

    p = sub.add_parser("experiment", help="run experiments 1-3 and write CSV tables")
    p.add_argument("--which", choices=("1", "2", "3", "all"), default="all")
    p.add_argument("--config")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("report", help="render tables written by 'experiment'")
    p.add_argument("--in-dir", required=True)
    p.add_argument("--format", choices=("csv", "markdown"), default="markdown")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (SindyCausalError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


if __name__ == "__main__":
    sys.exit(main())
