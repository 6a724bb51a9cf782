"""Dense linear-algebra and statistics kernels shared by SINDy and the baselines."""

import math

import numpy as np
import scipy.linalg
from scipy import stats

from .exceptions import ConvergenceError, DegenerateTestError, InputError, SizeError

# residuals within a few ulps of zero (relative to the input scale) are rounding noise only
_DEGENERATE_RTOL = 16 * np.finfo(float).eps


def _finite_2d(A, name):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if A.ndim != 2:
        raise InputError(f"{name} must be a matrix, got ndim={A.ndim}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} contains non-finite entries")
    return A


def least_squares(A, b):
    """Minimum-norm minimizer of ``||A x - b||_2``.

    Uses LAPACK ``gelsy`` (complete orthogonal factorization with column
    pivoting), so rank-deficient systems are handled and the returned solution
    has minimum norm among all minimizers.

    ``b`` may be a vector or a matrix of right-hand sides.
    """
    A = _finite_2d(A, "A")
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise InputError("b contains non-finite entries")
    m, k = A.shape
    if m < 1 or k < 1:
        raise SizeError(f"least_squares needs a non-empty matrix, got {A.shape}")
    if b.shape[0] != m:
        raise SizeError(f"A has {m} rows but b has {b.shape[0]}")
    # rank cutoff as in numpy.linalg.lstsq; scipy's bare eps misses exact duplicates
    cond = np.finfo(float).eps * max(m, k)
    x, *_ = scipy.linalg.lstsq(A, b, cond=cond, lapack_driver="gelsy", check_finite=False)
    return x


def _residualize(v, design):
    coef = least_squares(design, v)
    return v - design @ coef


def partial_correlation(x, y, Z=None):
    """Correlation of the residuals of ``x`` and ``y`` after regressing each on ``[1, Z]``.

    Raises
    ------
    DegenerateTestError
        If either residual has (numerically) zero variance.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    m = x.shape[0]
    if y.shape[0] != m:
        raise SizeError("x and y must have the same length")
    if Z is None:
        Z = np.empty((m, 0))
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[0] != m:
        raise SizeError("Z must have as many rows as x")
    if m <= Z.shape[1] + 2:
        raise SizeError(f"need more than {Z.shape[1] + 2} samples, got {m}")
    design = np.column_stack([np.ones(m), Z])
    rx = _residualize(x, design)
    ry = _residualize(y, design)
    for v, res in ((x, rx), (y, ry)):
        # a constant input leaves only rounding residue, which grows with m
        if np.ptp(v) == 0 or np.max(np.abs(res)) <= _DEGENERATE_RTOL * np.max(np.abs(v)):
            raise DegenerateTestError("zero-variance residual in partial correlation")
    nx, ny = np.linalg.norm(rx), np.linalg.norm(ry)
    r = float(rx @ ry / (nx * ny))
    return min(1.0, max(-1.0, r))


def fisher_z_independent(r, m, q, alpha):
    """Fisher-z test for zero (partial) correlation.

    Returns True when the hypothesis of independence is *not* rejected,
    i.e. ``sqrt(m - q - 3) * |atanh(r)| <= Phi^{-1}(1 - alpha/2)``.
    """
    dof = m - q - 3
    if dof <= 0:
        raise SizeError(f"Fisher-z needs m - q - 3 > 0, got m={m}, q={q}")
    if abs(r) > 1.0:
        raise SizeError(f"|r| must be <= 1, got {r}")
    if abs(r) == 1.0:
        return False
    stat = math.sqrt(dof) * abs(math.atanh(r))
    return stat <= stats.norm.ppf(1.0 - alpha / 2.0)


def f_test_nested(rss_restricted, rss_full, df_extra, df_resid, alpha):
    """Nested-model F test. Returns True when the full model is significantly better."""
    if rss_full < 0 or rss_restricted < rss_full - 1e-12:
        raise InputError(
            f"invalid residual sums: restricted={rss_restricted}, full={rss_full}"
        )
    if df_extra < 1 or df_resid < 1:
        raise SizeError(f"degrees of freedom must be >= 1, got {df_extra}, {df_resid}")
    if rss_full == 0.0:
        return rss_restricted > 0.0
    f_stat = ((rss_restricted - rss_full) / df_extra) / (rss_full / df_resid)
    return f_stat > stats.f.ppf(1.0 - alpha, df_extra, df_resid)


def delay_embedding(x, E, tau):
    """Rows ``(x[t], x[t - tau], ..., x[t - (E-1) tau])`` for every ``t`` with full history."""
    x = np.asarray(x, dtype=float).ravel()
    if E < 1 or tau < 1:
        raise SizeError(f"E and tau must be >= 1, got E={E}, tau={tau}")
    span = (E - 1) * tau
    m = x.shape[0]
    if m <= span:
        raise SizeError(f"series of length {m} too short for E={E}, tau={tau}")
    return np.column_stack([x[span - k * tau: m - k * tau] for k in range(E)])


def _sym_decorrelate(W):
    s, u = np.linalg.eigh(W @ W.T)
    s = np.clip(s, np.finfo(float).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ W


def fastica(X, seed=0, max_iter=500, tol=1e-6):
    """Symmetric FastICA with the tanh (log-cosh) contrast.

    Parameters
    ----------
    X : (m, p) array
        Observations; columns are centered internally.
    seed : int
        Seed for the random initial rotation.

    Returns
    -------
    unmixing : (p, p) array
        Maps centered observations to sources: ``sources.T == unmixing @ Xc.T``.
    sources : (m, p) array
        Estimated independent components (unit variance).
    """
    X = _finite_2d(X, "X")
    m, p = X.shape
    if p < 2:
        raise SizeError("fastica needs at least two columns")
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / m
    evals, evecs = np.linalg.eigh(cov)
    if evals[0] <= 1e-12 * max(evals[-1], np.finfo(float).tiny):
        raise InputError("covariance matrix is rank deficient")
    K = (evecs / np.sqrt(evals)).T
    Z = Xc @ K.T

    rng = np.random.default_rng(seed)
    W = _sym_decorrelate(rng.standard_normal((p, p)))
    for _ in range(max_iter):
        G = np.tanh(Z @ W.T)
        g_prime = 1.0 - G**2
        W_new = _sym_decorrelate(G.T @ Z / m - g_prime.mean(axis=0)[:, None] * W)
        lim = np.max(np.abs(np.abs(np.einsum("ij,ij->i", W_new, W)) - 1.0))
        W = W_new
        if lim < tol:
            break
    else:
        raise ConvergenceError(f"FastICA did not converge in {max_iter} iterations")

    unmixing = W @ K
    return unmixing, Xc @ unmixing.T


def knn_indices(points, query_row, k):
    """Indices of the ``k`` rows nearest to ``points[query_row]``, excluding itself.

    Distance is Euclidean; ties go to the lower index.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if k >= n:
        raise SizeError(f"k={k} must be smaller than the number of points {n}")
    d = np.sum((points - points[query_row]) ** 2, axis=1)
    d[query_row] = np.inf
    return np.argsort(d, kind="stable")[:k]


def knn_table(points, k, n_library=None):
    """``knn_indices`` for every row, searching only the first ``n_library`` rows.

    A row never counts as its own neighbour. Returns ``(indices, distances)``,
    both of shape ``(n, k)``.
    """
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    n_library = n if n_library is None else n_library
    if k >= n_library or n_library > n:
        raise SizeError(f"k={k} must be smaller than the library size {n_library} <= {n}")
    lib = points[:n_library]
    d2 = (
        np.sum(points**2, axis=1)[:, None]
        + np.sum(lib**2, axis=1)[None, :]
        - 2.0 * points @ lib.T
    )
    np.maximum(d2, 0.0, out=d2)
    rows = np.arange(n_library)
    d2[rows, rows] = np.inf
    idx = _k_smallest(d2, k)
    dist = np.sqrt(np.take_along_axis(d2, idx, axis=1))
    return idx, dist


def _k_smallest(d2, k):
    """Per-row indices of the k smallest entries, ordered by (value, index)."""
    part = np.argpartition(d2, k - 1, axis=1)[:, :k]
    vals = np.take_along_axis(d2, part, axis=1)
    kth = vals.max(axis=1)
    # a row whose k-th value is tied with an unselected entry needs the exact stable order
    tied = np.count_nonzero(d2 <= kth[:, None], axis=1) > k
    order = np.lexsort((part, vals), axis=1)
    idx = np.take_along_axis(part, order, axis=1)
    if tied.any():
        idx[tied] = np.argsort(d2[tied], axis=1, kind="stable")[:, :k]
    return idx
