"""Candidate libraries, sequentially thresholded least squares, and graph extraction.

Each derivative column ``Xdot[:, k]`` is regressed on the library matrix
``Theta(X)``; coefficients below the threshold are hard-zeroed and the
regression is repeated on the surviving features until the support stops
changing.
"""

import csv
import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .causal import CausalGraph
from .exceptions import ConflictError, ConvergenceWarning, DomainError, InputError, SizeError
from .numkernel import least_squares

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.1
DEFAULT_MAX_ITER = 20


def _monomial_id(exponents):
    parts = []
    for j, e in enumerate(exponents):
        if e == 1:
            parts.append(f"x{j}")
        elif e > 1:
            parts.append(f"x{j}^{e}")
    return " ".join(parts) or "1"


@dataclass(frozen=True)
class FeatureSpec:
    id: str
    kind: str  # constant | monomial | sine | cosine | power
    variables: tuple = ()
    exponents: tuple = ()
    exponent: float = 1.0

    @property
    def depends_on(self):
        if self.kind == "monomial":
            return frozenset(j for j, e in enumerate(self.exponents) if e)
        return frozenset(self.variables)

    @classmethod
    def constant(cls):
        return cls("1", "constant")

    @classmethod
    def monomial(cls, exponents):
        exponents = tuple(int(e) for e in exponents)
        if not any(exponents):
            return cls.constant()
        return cls(_monomial_id(exponents), "monomial", exponents=exponents)

    @classmethod
    def sine(cls, j):
        return cls(f"sin(x{j})", "sine", variables=(j,))

    @classmethod
    def cosine(cls, j):
        return cls(f"cos(x{j})", "cosine", variables=(j,))

    @classmethod
    def power(cls, variables, exponent):
        """``(prod of variables) ** exponent``; defined only for positive products."""
        variables = tuple(sorted(variables))
        base = " ".join(f"x{j}" for j in variables)
        return cls(f"({base})^{exponent:.6g}", "power", variables=variables, exponent=exponent)

    def evaluate(self, X):
        m = X.shape[0]
        if self.kind == "constant":
            return np.ones(m)
        if self.kind == "monomial":
            col = np.ones(m)
            for j, e in enumerate(self.exponents):
                if e:
                    col = col * X[:, j] ** e
            return col
        if self.kind == "sine":
            return np.sin(X[:, self.variables[0]])
        if self.kind == "cosine":
            return np.cos(X[:, self.variables[0]])
        if self.kind == "power":
            base = np.prod(X[:, list(self.variables)], axis=1)
            bad = np.flatnonzero(base <= 0)
            if bad.size:
                raise DomainError(
                    f"feature {self.id}: non-positive base {base[bad[0]]} at row {bad[0]}"
                )
            return base**self.exponent
        raise InputError(f"unknown feature kind {self.kind!r}")

    def label(self, names):
        """The id with generic ``x<j>`` placeholders replaced by ``names``."""
        out = self.id
        # replace high indices first so x1 does not clobber x10
        for j in sorted(range(len(names)), reverse=True):
            out = out.replace(f"x{j}", names[j])
        return out


@dataclass(frozen=True)
class CandidateLibrary:
    features: tuple
    p: int

    def __post_init__(self):
        ids = [f.id for f in self.features]
        dup = {i for i in ids if ids.count(i) > 1}
        if dup:
            raise ConflictError(f"duplicate feature ids: {sorted(dup)}")
        for f in self.features:
            if not f.depends_on <= set(range(self.p)):
                raise InputError(f"feature {f.id} reads variables outside 0..{self.p - 1}")

    def __len__(self):
        return len(self.features)

    @property
    def ids(self):
        return [f.id for f in self.features]

    def evaluate(self, X):
        """The ``m x num_features`` matrix Theta(X)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.p:
            raise SizeError(f"library expects {self.p} columns, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise InputError("X contains non-finite entries")
        return np.column_stack([f.evaluate(X) for f in self.features])


def default_library(p, max_degree=3, include_trig=True, extra=()):
    """Constant, all monomials up to ``max_degree`` (graded-lex), optional sin/cos, then ``extra``."""
    if max_degree < 1:
        raise InputError("max_degree must be >= 1")
    features = [FeatureSpec.constant()]
    for degree in range(1, max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(p), degree):
            exps = [0] * p
            for j in combo:
                exps[j] += 1
            features.append(FeatureSpec.monomial(exps))
    if include_trig:
        features += [FeatureSpec.sine(j) for j in range(p)]
        features += [FeatureSpec.cosine(j) for j in range(p)]
    features += list(extra)
    return CandidateLibrary(tuple(features), p)


def evaluate_library(lib, X):
    return lib.evaluate(X)


@dataclass(frozen=True)
class ConstraintMask:
    allowed: np.ndarray  # (num_features, p) bool

    @classmethod
    def full(cls, n_features, p):
        return cls(np.ones((n_features, p), dtype=bool))


@dataclass
class CoefficientMatrix:
    xi: np.ndarray
    library: CandidateLibrary
    threshold: float
    var_names: tuple = ()
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if not self.var_names:
            self.var_names = tuple(f"x{j}" for j in range(self.xi.shape[1]))

    def equations(self, precision=4):
        """Human-readable right-hand sides, one per variable."""
        out = []
        for k, name in enumerate(self.var_names):
            terms = [
                f"{self.xi[f, k]:+.{precision}g} {feat.label(self.var_names)}"
                for f, feat in enumerate(self.library.features)
                if self.xi[f, k] != 0
            ]
            out.append(f"d{name}/dt = " + (" ".join(terms) if terms else "0"))
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["feature", *self.var_names])
            for feat, row in zip(self.library.features, self.xi):
                w.writerow([feat.label(self.var_names), *(f"{v:.17g}" for v in row)])


def read_coefficients_csv(path):
    """Return ``(feature_labels, var_names, xi)`` from a file written by ``CoefficientMatrix.to_csv``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    names = tuple(rows[0][1:])
    labels = [r[0] for r in rows[1:]]
    xi = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return labels, names, xi


def stls(theta, xdot_col, threshold, max_iter=DEFAULT_MAX_ITER, allowed=None):
    """Sequentially thresholded least squares for one target column.

    Columns of ``theta`` are scaled to unit norm for the solve; the threshold is
    applied to the coefficients in the original units. ``allowed`` (bool per
    column) removes features from the start.

    Returns the coefficient vector. Emits :class:`ConvergenceWarning` if the
    support is still changing after ``max_iter`` passes.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(xdot_col, dtype=float).ravel()
    if threshold <= 0:
        raise InputError("threshold must be positive")
    if theta.shape[0] != y.shape[0]:
        raise SizeError(f"theta has {theta.shape[0]} rows, target has {y.shape[0]}")
    n_feat = theta.shape[1]
    norms = np.linalg.norm(theta, axis=0)
    active = norms > 0
    if allowed is not None:
        active &= np.asarray(allowed, dtype=bool)
    coef = np.zeros(n_feat)

    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            return coef
        c = least_squares(theta[:, idx] / norms[idx], y) / norms[idx]
        keep = np.abs(c) >= threshold
        if keep.all():
            coef[idx] = c
            return coef
        active[idx[~keep]] = False

    warnings.warn(
        f"STLS support still changing after {max_iter} iterations", ConvergenceWarning
    )
    coef[idx[keep]] = c[keep]
    return coef


def fit(traj, lib, threshold=DEFAULT_THRESHOLD, max_iter=DEFAULT_MAX_ITER, mask=None):
    """Run STLS independently for every derivative column of ``traj``."""
    if lib.p != traj.p:
        raise SizeError(f"library is over {lib.p} variables, trajectory has {traj.p}")
    if mask is not None and mask.allowed.shape != (len(lib), traj.p):
        raise SizeError(
            f"mask shape {mask.allowed.shape} != ({len(lib)}, {traj.p})"
        )
    theta = lib.evaluate(traj.states)
    xi = np.zeros((len(lib), traj.p))
    notes = []
    for k in range(traj.p):
        allowed = None if mask is None else mask.allowed[:, k]
        if allowed is not None and not allowed.any():
            msg = f"column {k} ({traj.var_names[k]}): every feature masked out"
            warnings.warn(msg, ConvergenceWarning)
            notes.append(msg)
            continue
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            try:
                xi[:, k] = stls(theta, traj.derivs[:, k], threshold, max_iter, allowed)
            except Exception as exc:
                raise type(exc)(f"column {k} ({traj.var_names[k]}): {exc}") from exc
        for w in caught:
            notes.append(f"column {k} ({traj.var_names[k]}): {w.message}")
            logger.debug(notes[-1])
    return CoefficientMatrix(xi, lib, threshold, traj.var_names, notes)


def fit_constrained(traj, lib, threshold, mask, max_iter=DEFAULT_MAX_ITER):
    """:func:`fit` with features excluded per equation where ``mask.allowed`` is False."""
    return fit(traj, lib, threshold, max_iter, mask=mask)


def coefficients_to_graph(coefs):
    """Edge ``j -> i`` iff a feature reading ``j`` has a nonzero coefficient in equation ``i``."""
    p = coefs.xi.shape[1]
    adj = np.zeros((p, p), dtype=np.int8)
    for f, feat in enumerate(coefs.library.features):
        for i in np.flatnonzero(coefs.xi[f]):
            for j in feat.depends_on:
                adj[i, j] = 1
    return CausalGraph(adj, coefs.var_names)
