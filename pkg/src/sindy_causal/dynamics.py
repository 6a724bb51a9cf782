"""Benchmark dynamical systems, fixed-step RK4 simulation, and noise augmentation."""

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .causal import CausalGraph
from .exceptions import (
    DomainError,
    InputError,
    IntegrationError,
    PreconditionError,
    SimulationError,
    SizeError,
)
from .sindy import FeatureSpec

DIVERGENCE_GUARD = 1e12
NOISE_PREFIX = "noise_"


@dataclass(frozen=True)
class SystemSpec:
    name: str
    var_names: tuple
    rhs: Callable[[np.ndarray], np.ndarray]
    parents: dict  # effect index -> tuple of cause indices
    default_dt: float
    ic_box: tuple  # one (low, high) pair per variable
    extra_library_terms: tuple = ()

    @property
    def dim(self):
        return len(self.var_names)

    @property
    def ground_truth(self):
        return CausalGraph.from_parents(self.parents, self.var_names)

    def sample_ic(self, rng):
        low, high = np.array(self.ic_box, dtype=float).T
        while True:
            ic = rng.uniform(low, high)
            if np.any(ic != 0.0):
                return ic


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    derivs: np.ndarray
    var_names: tuple
    n_system: int = field(default=-1)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.derivs = np.asarray(self.derivs, dtype=float)
        self.var_names = tuple(self.var_names)
        if self.states.ndim != 2 or self.states.shape != self.derivs.shape:
            raise SizeError(
                f"states {self.states.shape} and derivs {self.derivs.shape} must match"
            )
        if self.times.shape != (self.states.shape[0],):
            raise SizeError("one time stamp per sample required")
        if len(self.var_names) != self.states.shape[1]:
            raise SizeError("one name per column required")
        if self.n_system < 0:
            self.n_system = self.states.shape[1]
        if not (np.all(np.isfinite(self.states)) and np.all(np.isfinite(self.derivs))):
            raise InputError("trajectory contains non-finite entries")

    @classmethod
    def from_states(cls, states, dt=1.0, var_names=None):
        """Wrap a raw ``m x p`` series; derivatives are left at zero."""
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        names = var_names or tuple(f"x{j}" for j in range(states.shape[1]))
        return cls(dt * np.arange(states.shape[0]), states, np.zeros_like(states), names)

    @property
    def m(self):
        return self.states.shape[0]

    @property
    def p(self):
        return self.states.shape[1]

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if self.m > 1 else float("nan")

    def to_csv(self, path):
        """Write ``t, x_1..x_p, dx_1..dx_p`` rows with 17 significant digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", *self.var_names, *(f"d{v}" for v in self.var_names)])
            for t, x, dx in zip(self.times, self.states, self.derivs):
                w.writerow([f"{v:.17g}" for v in (t, *x, *dx)])

    @classmethod
    def from_csv(cls, path):
        """Read a file written by :meth:`to_csv`.

        Columns whose names start with ``noise_`` are treated as noise channels.
        """
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header = rows[0]
        p = (len(header) - 1) // 2
        names = tuple(header[1: 1 + p])
        data = np.array(rows[1:], dtype=float).reshape(-1, 1 + 2 * p)
        n_system = sum(not v.startswith(NOISE_PREFIX) for v in names)
        return cls(data[:, 0], data[:, 1: 1 + p], data[:, 1 + p:], names, n_system)


def _lorenz(s):
    x, y, z = s
    return np.array([10.0 * (y - x), x * (28.0 - z), x * y - 8.0 / 3.0 * z])


def _mrw(s):
    k, h = s
    kh = k * h
    if kh < 0:
        raise DomainError(f"MRW: (k*h)^(1/3) undefined for k*h={kh} < 0")
    c = 0.01 * kh ** (1.0 / 3.0)
    return np.array([c - 0.06 * k, c - 0.06 * h])


def _fitzhugh_nagumo(s):
    v, w = s
    return np.array([v * (0.1 - v) * (v - 1.0) - w + 5.0, 0.01 * v - 0.02 * w])


def _lotka_volterra(s):
    n1, n2, n3, n4 = s
    return np.array([
        n1 * (1.0 - n1 - 1.09 * n2 - 1.52 * n3),
        0.72 * n2 * (1.0 - n2 - 0.44 * n3 - 1.36 * n4),
        1.53 * n3 * (1.0 - 2.33 * n1 - n3 - 0.47 * n4),
        1.27 * n4 * (1.0 - 1.21 * n1 - 0.52 * n2 - 1.53 * n3 - n4),
    ])


def _pendulum(s):
    u, v = s
    return np.array([v, -0.76 * math.sin(u)])


_SIR_BETA = 0.715 / 60.0
_SIR_GAMMA = 0.285


def _sir(s):
    sus, inf, _ = s
    new = _SIR_BETA * inf * sus
    return np.array([-new, new - _SIR_GAMMA * inf, _SIR_GAMMA * inf])


SYSTEMS = {
    "lorenz": SystemSpec(
        "lorenz", ("x", "y", "z"), _lorenz,
        {0: (0, 1), 1: (0, 2), 2: (0, 1, 2)},
        default_dt=0.002, ic_box=((-10, 10),) * 3,
    ),
    "mrw": SystemSpec(
        "mrw", ("k", "h"), _mrw,
        {0: (0, 1), 1: (0, 1)},
        default_dt=0.5, ic_box=((0.5, 5),) * 2,
        extra_library_terms=(FeatureSpec.power((0, 1), 1.0 / 3.0),),
    ),
    "fitzhugh_nagumo": SystemSpec(
        "fitzhugh_nagumo", ("v", "w"), _fitzhugh_nagumo,
        {0: (0, 1), 1: (0, 1)},
        default_dt=0.1, ic_box=((-1, 1),) * 2,
    ),
    "lotka_volterra": SystemSpec(
        "lotka_volterra", ("n1", "n2", "n3", "n4"), _lotka_volterra,
        {0: (0, 1, 2), 1: (1, 2, 3), 2: (0, 2, 3), 3: (0, 1, 2, 3)},
        default_dt=0.05, ic_box=((0.1, 0.9),) * 4,
    ),
    "pendulum": SystemSpec(
        "pendulum", ("u", "v"), _pendulum,
        {0: (1,), 1: (0,)},
        default_dt=0.05, ic_box=((-2, 2), (-1, 1)),
    ),
    "sir": SystemSpec(
        "sir", ("s", "i", "r"), _sir,
        {0: (0, 1), 1: (0, 1), 2: (1,)},
        default_dt=0.1, ic_box=((40, 80), (0.5, 5), (0, 0)),
    ),
}


def get_system(name):
    try:
        return SYSTEMS[name]
    except KeyError:
        raise InputError(f"unknown system {name!r}; choose from {sorted(SYSTEMS)}") from None


def rhs_eval(spec, state):
    state = np.asarray(state, dtype=float)
    if state.shape != (spec.dim,):
        raise SizeError(f"{spec.name} expects a state of length {spec.dim}")
    if not np.all(np.isfinite(state)):
        raise InputError("state contains non-finite entries")
    out = spec.rhs(state)
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise DomainError(
            f"{spec.name}: non-finite derivative in component {spec.var_names[bad[0]]}"
        )
    return out


def rk4_step(rhs, state, dt, step=None):
    """One classical fourth-order Runge-Kutta step."""
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt}")
    state = np.asarray(state, dtype=float)
    k1 = np.asarray(rhs(state), dtype=float)
    k2 = np.asarray(rhs(state + 0.5 * dt * k1), dtype=float)
    k3 = np.asarray(rhs(state + 0.5 * dt * k2), dtype=float)
    k4 = np.asarray(rhs(state + dt * k3), dtype=float)
    for n, k in enumerate((k1, k2, k3, k4), start=1):
        if not np.all(np.isfinite(k)):
            raise IntegrationError(f"non-finite RK4 stage k{n} at step {step}", step=step)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def finite_difference_derivs(states, dt):
    """Second-order finite differences: central inside, one-sided at both ends."""
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
    if states.shape[0] < 3:
        raise SizeError(f"finite differences need at least 3 samples, got {states.shape[0]}")
    return np.gradient(states, dt, axis=0, edge_order=2)


def simulate(spec, ic, dt, n_steps, derivative_mode="exact"):
    """Integrate ``spec`` from ``ic`` and return ``n_steps`` samples (the first is ``ic``).

    ``derivative_mode`` is ``"exact"`` (rhs at each stored state) or
    ``"finite_difference"``.
    """
    if n_steps < 1:
        raise InputError("n_steps must be positive")
    if not dt > 0:
        raise InputError(f"dt must be positive, got {dt}")

    def rhs(s):
        return rhs_eval(spec, s)

    states = np.empty((n_steps, spec.dim))
    states[0] = np.asarray(ic, dtype=float)
    for n in range(1, n_steps):
        try:
            states[n] = rk4_step(rhs, states[n - 1], dt, step=n)
        except DomainError as exc:
            raise SimulationError(f"{spec.name}: {exc} during step {n}", step=n) from exc
        if np.max(np.abs(states[n])) > DIVERGENCE_GUARD:
            raise SimulationError(f"{spec.name}: trajectory diverged at step {n}", step=n)

    if derivative_mode == "exact":
        derivs = np.array([rhs(s) for s in states])
    elif derivative_mode == "finite_difference":
        derivs = finite_difference_derivs(states, dt)
    else:
        raise InputError(f"unknown derivative_mode {derivative_mode!r}")
    times = dt * np.arange(n_steps)
    return Trajectory(times, states, derivs, spec.var_names, spec.dim)


def augment_with_noise(traj, seed):
    """Append one i.i.d. standard-normal channel per system variable."""
    if traj.p != traj.n_system:
        raise PreconditionError("trajectory already has noise channels")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((traj.m, traj.n_system))
    names = traj.var_names + tuple(f"{NOISE_PREFIX}{k + 1}" for k in range(traj.n_system))
    return replace(
        traj,
        states=np.hstack([traj.states, noise]),
        derivs=np.hstack([traj.derivs, finite_difference_derivs(noise, traj.dt)]),
        var_names=names,
    )


def ground_truth_graph(spec, augmented=False):
    """Adjacency of variable appearances in each equation, optionally padded with isolated noise nodes."""
    g = spec.ground_truth
    if not augmented:
        return g
    n = spec.dim
    adj = np.zeros((2 * n, 2 * n), dtype=np.int8)
    adj[:n, :n] = g.adj
    names = g.var_names + tuple(f"{NOISE_PREFIX}{k + 1}" for k in range(n))
    return CausalGraph(adj, names)
