"""Causal graphs over endogenous variables, the Hamming loss, and SINDy constraint masks.

Convention: ``adj[i, j] == 1`` means variable ``j`` is a direct cause of
variable ``i`` (row = effect, column = cause).
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InputError, SizeError


@dataclass(eq=False)
class CausalGraph:
    adj: np.ndarray
    var_names: tuple = ()
    notes: list = field(default_factory=list)

    def __post_init__(self):
        adj = np.asarray(self.adj)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise InputError(f"adjacency must be square, got shape {adj.shape}")
        if not np.all((adj == 0) | (adj == 1)):
            raise InputError("adjacency entries must be 0 or 1")
        self.adj = adj.astype(np.int8)
        n = adj.shape[0]
        if not self.var_names:
            self.var_names = tuple(f"x{j}" for j in range(n))
        self.var_names = tuple(self.var_names)
        if len(self.var_names) != n:
            raise InputError(f"{len(self.var_names)} names for {n} variables")

    @property
    def n(self):
        return self.adj.shape[0]

    @classmethod
    def empty(cls, n, var_names=(), notes=None):
        return cls(np.zeros((n, n), dtype=np.int8), var_names, list(notes or []))

    @classmethod
    def from_parents(cls, parents, var_names=()):
        """Build from ``{effect: iterable of causes}`` with integer indices."""
        n = len(var_names) if var_names else len(parents)
        adj = np.zeros((n, n), dtype=np.int8)
        for i, causes in parents.items():
            for j in causes:
                adj[i, j] = 1
        return cls(adj, var_names)

    def parents(self, i):
        return set(np.flatnonzero(self.adj[i]).tolist())

    def n_edges(self):
        return int(self.adj.sum())

    def edges(self):
        """``(cause, effect)`` name pairs in row-major order."""
        return [
            (self.var_names[j], self.var_names[i])
            for i, j in zip(*np.nonzero(self.adj))
        ]

    def edge_list(self):
        return "\n".join(f"{c} -> {e}" for c, e in self.edges())

    def __eq__(self, other):
        if not isinstance(other, CausalGraph):
            return NotImplemented
        return self.var_names == other.var_names and np.array_equal(self.adj, other.adj)

    def __repr__(self):
        return f"CausalGraph(n={self.n}, edges={self.n_edges()})"

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.var_names)
            w.writerows(self.adj.tolist())

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        names = tuple(rows[0])
        adj = np.array([[int(v) for v in r] for r in rows[1:]], dtype=np.int8)
        return cls(adj.reshape(len(names), len(names)), names)


def hamming_loss(g1, g2):
    """Fraction of the n*n adjacency entries (diagonal included) on which the graphs differ."""
    if g1.n != g2.n:
        raise SizeError(f"graph sizes differ: {g1.n} vs {g2.n}")
    if g1.n == 0:
        return 0.0
    return float(np.count_nonzero(g1.adj != g2.adj)) / g1.n**2


def graph_restrict(g, k):
    """Top-left ``k x k`` block of ``g``."""
    if k > g.n or k < 0:
        raise SizeError(f"cannot restrict a {g.n}-node graph to {k} nodes")
    return CausalGraph(g.adj[:k, :k].copy(), g.var_names[:k])


def graph_to_constraint_mask(g, lib):
    """Allow feature ``f`` in equation ``i`` only if every variable it reads is a parent of ``i``.

    Constant features read nothing and are therefore always allowed.
    """
    from .sindy import ConstraintMask

    if lib.p != g.n:
        raise SizeError(f"library has {lib.p} variables, graph has {g.n}")
    allowed = np.zeros((len(lib.features), g.n), dtype=bool)
    for i in range(g.n):
        parents = g.parents(i)
        for f, feat in enumerate(lib.features):
            allowed[f, i] = feat.depends_on <= parents
    return ConstraintMask(allowed)
