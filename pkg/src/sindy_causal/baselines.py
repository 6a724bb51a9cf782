"""Comparison causal-discovery algorithms: Granger causality, CCM, PCMCI and ICA-LiNGAM.

Every function takes a :class:`~sindy_causal.dynamics.Trajectory` (only the
state matrix is used) and returns a :class:`~sindy_causal.causal.CausalGraph`
with ``adj[i, j] == 1`` meaning ``j`` causes ``i``.
"""

import itertools
import logging
from dataclasses import dataclass

import numpy as np

from .causal import CausalGraph
from .exceptions import (
    ConvergenceError,
    DegenerateTestError,
    InputError,
    SizeError,
)
from .numkernel import (
    delay_embedding,
    f_test_nested,
    fastica,
    fisher_z_independent,
    knn_table,
    least_squares,
    partial_correlation,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BaselineParams:
    granger_max_lag: int = 3
    granger_alpha: float = 0.01
    ccm_E: int = 3
    ccm_tau: int = 1
    ccm_lib_sizes: tuple = tuple(range(20, 501, 40))
    ccm_rho_gain: float = 0.1
    pcmci_max_lag: int = 3
    pcmci_alpha: float = 0.01
    pcmci_max_conds: int = 3
    lingam_prune_threshold: float = 0.05

    def __post_init__(self):
        if min(self.granger_max_lag, self.ccm_E, self.ccm_tau, self.pcmci_max_lag) < 1:
            raise InputError("lags and embedding parameters must be >= 1")
        for a in (self.granger_alpha, self.pcmci_alpha):
            if not 0 < a < 1:
                raise InputError(f"significance level {a} outside (0, 1)")
        sizes = tuple(self.ccm_lib_sizes)
        if list(sizes) != sorted(set(sizes)) or len(sizes) < 2:
            raise InputError("ccm_lib_sizes must be strictly increasing with >= 2 entries")
        object.__setattr__(self, "ccm_lib_sizes", sizes)


def _states(traj):
    return np.asarray(traj.states, dtype=float)


def _lags(x, L, start):
    """Columns ``x[t-1], ..., x[t-L]`` for ``t = start .. len(x)-1``."""
    m = len(x)
    return np.column_stack([x[start - k: m - k] for k in range(1, L + 1)])


def _rss(design, y):
    resid = y - design @ least_squares(design, y)
    return float(resid @ resid)


# -- Granger ---------------------------------------------------------------

def granger(traj, params=BaselineParams()):
    """Pairwise (bivariate) Granger causality with a nested-model F test."""
    X = _states(traj)
    m, p = X.shape
    L = params.granger_max_lag
    if m <= 2 * L + 10:
        raise SizeError(f"granger needs more than {2 * L + 10} samples, got {m}")
    adj = np.zeros((p, p), dtype=np.int8)
    notes = []
    constant = [j for j in range(p) if np.ptp(X[:, j]) == 0]
    for j in constant:
        notes.append(f"granger: {traj.var_names[j]} is constant; no edges assigned")

    n_obs = m - L
    ones = np.ones((n_obs, 1))
    lags = [_lags(X[:, j], L, L) for j in range(p)]
    for i in range(p):
        if i in constant:
            continue
        y = X[L:, i]
        restricted = np.hstack([ones, lags[i]])
        rss_r = _rss(restricted, y)
        rss_c = float(np.sum((y - y.mean()) ** 2))
        if f_test_nested(rss_c, min(rss_r, rss_c), L, n_obs - (1 + L), params.granger_alpha):
            adj[i, i] = 1
        for j in range(p):
            if j == i or j in constant:
                continue
            rss_f = _rss(np.hstack([restricted, lags[j]]), y)
            if f_test_nested(rss_r, min(rss_f, rss_r), L, n_obs - (1 + 2 * L),
                             params.granger_alpha):
                adj[i, j] = 1
    return CausalGraph(adj, traj.var_names, notes)


# -- Convergent cross mapping ----------------------------------------------

def _corr(a, b):
    sa, sb = a.std(), b.std()
    if sa == 0 or sb == 0:
        return 0.0
    return float(np.mean((a - a.mean()) * (b - b.mean())) / (sa * sb))


def ccm_skill(traj, params=BaselineParams()):
    """Cross-map skill curves.

    Returns an array ``rho`` of shape ``(len(lib_sizes), p, p)`` where
    ``rho[l, i, j]`` is the correlation between ``x_j`` and its estimate from
    the delay embedding of ``x_i``. Every embedded time point is estimated from
    its ``E + 1`` nearest neighbours among the first ``lib_sizes[l]`` points.
    """
    X = _states(traj)
    m, p = X.shape
    E, tau, sizes = params.ccm_E, params.ccm_tau, params.ccm_lib_sizes
    span = (E - 1) * tau
    if m < sizes[-1] + span:
        raise SizeError(f"ccm needs at least {sizes[-1] + span} samples, got {m}")
    targets = X[span:]
    rho = np.zeros((len(sizes), p, p))
    for i in range(p):
        emb = delay_embedding(X[:, i], E, tau)
        for s, ell in enumerate(sizes):
            idx, dist = knn_table(emb, E + 1, n_library=ell)
            d1 = dist[:, :1]
            zero = d1[:, 0] == 0
            w = np.exp(-dist / np.where(zero[:, None], 1.0, d1))
            w[zero] = (dist[zero] == 0).astype(float)
            w /= w.sum(axis=1, keepdims=True)
            est = np.einsum("tk,tkj->tj", w, targets[idx])
            for j in range(p):
                rho[s, i, j] = _corr(est[:, j], targets[:, j])
    return rho


def ccm(traj, params=BaselineParams()):
    """Convergent cross mapping.

    ``j`` causes ``i`` when the delay embedding of ``x_i`` predicts ``x_j``
    better as the library grows: ``rho(L_max) - rho(L_min) > ccm_rho_gain``
    and ``rho(L_max) > 0``. The diagonal is always set.
    """
    rho = ccm_skill(traj, params)
    gain = rho[-1] - rho[0]
    adj = ((gain > params.ccm_rho_gain) & (rho[-1] > 0)).astype(np.int8)
    np.fill_diagonal(adj, 1)
    return CausalGraph(adj, traj.var_names)


# -- PCMCI -----------------------------------------------------------------

class _LaggedData:
    """Aligned lagged copies of every column, sharing one start offset."""

    def __init__(self, X, max_total_lag):
        self.X = X
        self.offset = max_total_lag
        self.n = X.shape[0] - max_total_lag

    def col(self, j, tau):
        m = self.X.shape[0]
        return self.X[self.offset - tau: m - tau, j]

    def block(self, nodes):
        if not nodes:
            return np.empty((self.n, 0))
        return np.column_stack([self.col(j, tau) for j, tau in nodes])


def _ci_test(data, target, node, conds, alpha, notes):
    """Returns ``(independent, |r|)``; degenerate tests count as independent."""
    try:
        r = partial_correlation(data.col(*node), data.col(target, 0), data.block(conds))
    except DegenerateTestError:
        notes.append(f"pcmci: degenerate test {node} -> {target}; treated as independent")
        return True, 0.0
    return fisher_z_independent(r, data.n, len(conds), alpha), abs(r)


def _pc_stage(data, target, candidates, alpha, max_conds, notes):
    parents = list(candidates)
    strength = {c: np.inf for c in parents}
    for q in range(max_conds + 1):
        if q > len(parents) - 1:
            break
        nonsig = []
        for node in parents:
            conds = [c for c in parents if c != node][:q]
            independent, r = _ci_test(data, target, node, conds, alpha, notes)
            if independent:
                nonsig.append(node)
            else:
                strength[node] = min(strength[node], r)
        parents = [c for c in parents if c not in nonsig]
        parents.sort(key=lambda c: -strength[c])
    return parents


def pcmci(traj, params=BaselineParams(), return_links=False):
    """PC-style condition selection followed by momentary conditional independence tests.

    Lag-resolved links ``x_j(t - tau) -> x_i(t)`` (``tau >= 1``) are collapsed to
    ``adj[i, j] = 1`` if any lag survives.
    """
    X = _states(traj)
    m, p = X.shape
    L = params.pcmci_max_lag
    if m <= 10 * (L + 1):
        raise SizeError(f"pcmci needs more than {10 * (L + 1)} samples, got {m}")
    data = _LaggedData(X, 2 * L)
    notes = []
    candidates = [(j, tau) for j in range(p) for tau in range(1, L + 1)]

    parents = {
        i: _pc_stage(data, i, candidates, params.pcmci_alpha, params.pcmci_max_conds, notes)
        for i in range(p)
    }

    links = set()
    for i in range(p):
        for j, tau in candidates:
            conds = [c for c in parents[i] if c != (j, tau)]
            conds += [(k, t + tau) for k, t in parents[j] if (k, t + tau) not in conds]
            independent, _ = _ci_test(data, i, (j, tau), conds, params.pcmci_alpha, notes)
            if not independent:
                links.add((j, tau, i))

    adj = np.zeros((p, p), dtype=np.int8)
    for j, _, i in links:
        adj[i, j] = 1
    graph = CausalGraph(adj, traj.var_names, notes)
    if return_links:
        return graph, parents, sorted(links)
    return graph


# -- ICA-LiNGAM ------------------------------------------------------------

MAX_LINGAM_VARS = 8


def _lingam_B(X, seed):
    p = X.shape[1]
    W, _ = fastica(X, seed=seed)
    perms = np.array(list(itertools.permutations(range(p))))
    with np.errstate(divide="ignore"):
        cost = 1.0 / np.abs(W)
    row_perm = perms[np.argmin(cost[perms, np.arange(p)].sum(axis=1))]
    Wp = W[row_perm]
    Wp = Wp / np.diag(Wp)[:, None]
    B = np.eye(p) - Wp

    iu = np.triu_indices(p, 1)
    B2 = B**2
    order = perms[np.argmin(B2[perms[:, iu[0]], perms[:, iu[1]]].sum(axis=1))]
    # entries that point against the causal order are structurally zero
    B[order[iu[0]], order[iu[1]]] = 0.0
    np.fill_diagonal(B, 0.0)
    return B, order


def lingam(traj, params=BaselineParams(), seed=0):
    """ICA-LiNGAM on the contemporaneous state matrix.

    ICA failures (no convergence, singular covariance) yield an empty graph
    with an explanatory note rather than an exception.
    """
    X = _states(traj)
    m, p = X.shape
    if p == 1:
        return CausalGraph.empty(1, traj.var_names)
    if m < 200:
        raise SizeError(f"lingam needs at least 200 samples, got {m}")
    if p > MAX_LINGAM_VARS:
        raise SizeError(f"exhaustive LiNGAM supports at most {MAX_LINGAM_VARS} variables")
    try:
        B, _ = _lingam_B(X, seed)
    except (ConvergenceError, InputError) as exc:
        logger.info("lingam failed: %s", exc)
        return CausalGraph.empty(p, traj.var_names, [f"lingam: {exc}"])
    adj = (np.abs(B) >= params.lingam_prune_threshold).astype(np.int8)
    np.fill_diagonal(adj, 0)
    return CausalGraph(adj, traj.var_names)


METHODS = {
    "pcmci": pcmci,
    "lingam": lingam,
    "gc": granger,
    "ccm": ccm,
}
