"""Law verification via empirical characteristic functions and independence
testing via permutation-calibrated distance covariance."""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist, squareform
from scipy.stats import norm

from .chars import integrated_exponent
from .paths import PathError
from .report import ReportRow, TestReport
from .simulate import RngStream

DEFAULT_U_MAX = 5.0
DEFAULT_N_U = 21
MIN_ECF_PATHS = 1000
MIN_INDEPENDENCE_PAIRS = 50


def default_u_grid(u_max=DEFAULT_U_MAX, n_u=DEFAULT_N_U):
    return np.linspace(-u_max, u_max, n_u)


def _values_at_times(paths, grid, times):
    if isinstance(paths, np.ndarray):
        raise TypeError("pass paths, or use ecf_law_test_matrix for value arrays")
    mats = np.stack([p.values for p in paths])
    idx = [grid.index_of(t) for t in times]
    return mats[:, idx]


def ecf_statistics(values_at_times, chars, times, u_grid):
    """Studentized gaps between empirical and model characteristic functions.

    Returns an array of shape (len(times), len(u_grid)).  Per (t, u) the
    statistic is |phi_hat - phi| * sqrt(N) / sqrt(1 - |phi|^2 + 1/N); the
    denominator is the total variance of exp(iuX) under the model, floored by
    the 1/N term when the model mass is concentrated.
    """
    values = np.asarray(values_at_times, dtype=float)
    n_paths = values.shape[0]
    u = np.asarray(u_grid, dtype=float)
    stats = np.empty((len(times), u.size))
    for i, t in enumerate(times):
        phi_model = np.exp(integrated_exponent(chars, u, float(t)))
        phase = np.exp(1j * values[:, i][:, None] * u[None, :])
        phi_hat = phase.mean(axis=0)
        scale = np.sqrt(np.maximum(1.0 - np.abs(phi_model) ** 2, 0.0) + 1.0 / n_paths)
        stats[i] = np.abs(phi_hat - phi_model) * np.sqrt(n_paths) / scale
    return stats


def ecf_law_test(paths, chars, times, u_grid=None, *, alpha=0.01, scenario="",
                 seeds=(), min_paths=MIN_ECF_PATHS):
    """Empirical-characteristic-function law test against the characteristics.

    The law of the driver is pinned by its characteristics, so the path
    marginals at the checkpoint times must match the integrated exponent.
    """
    paths = list(paths)
    if not paths:
        raise ValueError("empty path set")
    if len(paths) < min_paths:
        raise ValueError(f"need at least {min_paths} paths, got {len(paths)}")
    grid = paths[0].grid
    values = _values_at_times(paths, grid, times)
    return ecf_law_test_matrix(values, chars, times, u_grid, alpha=alpha,
                               scenario=scenario, seeds=seeds, min_paths=min_paths)


def ecf_law_test_matrix(values_at_times, chars, times, u_grid=None, *, alpha=0.01,
                        scenario="", seeds=(), min_paths=MIN_ECF_PATHS):
    values = np.asarray(values_at_times, dtype=float)
    if values.ndim != 2 or values.shape[1] != len(times):
        raise ValueError("values must be (n_paths, n_times)")
    if values.shape[0] < min_paths:
        raise ValueError(f"need at least {min_paths} paths, got {values.shape[0]}")
    u = default_u_grid() if u_grid is None else np.asarray(u_grid, dtype=float)
    stats = ecf_statistics(values, chars, times, u)
    n_checks = stats.size
    level = alpha / n_checks
    threshold = float(norm.ppf(1.0 - level / 2.0))
    rows = []
    for i, t in enumerate(times):
        worst = int(np.argmax(stats[i]))
        rows.append(ReportRow(
            f"t={t:g}", float(stats[i].max()), threshold,
            bool(stats[i].max() <= threshold),
            f"worst u={u[worst]:g}"))
    max_stat = float(stats.max())
    return TestReport(
        test="ecf-law", scenario=scenario, passed=max_stat <= threshold,
        alpha=alpha, max_stat=max_stat, threshold=threshold, rows=tuple(rows),
        seeds=tuple(seeds),
        metrics=(("n_paths", values.shape[0]), ("n_checks", n_checks)),
    )


# -- distance covariance -----------------------------------------------------

def _centered_distances(data):
    d = squareform(pdist(np.asarray(data, dtype=float)))
    return d - d.mean(axis=0, keepdims=True) - d.mean(axis=1, keepdims=True) + d.mean()


def distance_covariance_sq(xs, vs):
    """Biased (V-statistic) squared sample distance covariance."""
    a = _centered_distances(xs)
    b = _centered_distances(vs)
    return float(np.mean(a * b))


try:
    import warnings

    import numba

    # the threading backend choice is environment noise, not a user concern
    warnings.filterwarnings("ignore", category=numba.NumbaWarning)

    @numba.njit(parallel=True, fastmath=True, cache=True)
    def _permuted_products(a, b, perms):  # pragma: no cover - jitted
        n_perm = perms.shape[0]
        n = a.shape[0]
        out = np.empty(n_perm)
        for p in numba.prange(n_perm):
            idx = perms[p]
            acc = 0.0
            for i in range(n):
                bi = b[idx[i]]
                ai = a[i]
                row = 0.0
                for j in range(n):
                    row += ai[j] * bi[idx[j]]
                acc += row
            out[p] = acc / (n * n)
        return out
except ImportError:  # pragma: no cover - numba is normally present
    _permuted_products = None


def _permutation_null(a, b, n_perm, gen):
    """Permuted statistics mean(a * b[idx][:, idx]).

    Permutations are drawn up front from the seeded generator, so the jitted
    and plain paths produce identical results.  Single precision is fine
    here: the values only feed a rank-based p-value.
    """
    n = a.shape[0]
    a32 = np.ascontiguousarray(a, dtype=np.float32)
    b32 = np.ascontiguousarray(b, dtype=np.float32)
    perms = np.stack([gen.permutation(n) for _ in range(n_perm)])
    if _permuted_products is not None:
        return _permuted_products(a32, b32, perms)
    rows = np.empty_like(b32)
    perm = np.empty_like(b32)
    out = np.empty(n_perm)
    flat_a = a32.reshape(-1)
    for i in range(n_perm):
        idx = perms[i]
        np.take(b32, idx, axis=0, out=rows)
        np.take(rows, idx, axis=1, out=perm)
        out[i] = np.dot(flat_a, perm.reshape(-1)) / (n * n)
    return out


def independence_test(xs, vs, n_perm=500, *, alpha=0.01, seed=0, scenario="",
                      seeds=(), null_out=None):
    """Permutation test of independence via distance covariance.

    The pairing between the two samples is shuffled ``n_perm`` times; the
    p-value is (1 + #{permuted >= observed}) / (n_perm + 1).  Double
    centering commutes with simultaneous row/column permutation, so the
    centered matrices are built once.  Pass a list as ``null_out`` to receive
    the permuted statistics (for plotting).
    """
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    vs = np.atleast_2d(np.asarray(vs, dtype=float))
    if xs.shape[0] != vs.shape[0]:
        raise ValueError("samples must be matched")
    n = xs.shape[0]
    if n < MIN_INDEPENDENCE_PAIRS:
        raise ValueError(f"need at least {MIN_INDEPENDENCE_PAIRS} replications, got {n}")
    a = _centered_distances(xs)
    b = _centered_distances(vs)
    observed = float(np.mean(a * b))
    gen = RngStream(seed, 0).generator()
    perm_stats = _permutation_null(a, b, n_perm, gen)
    if null_out is not None:
        null_out.extend(perm_stats.tolist())
    p_value = (1.0 + float(np.sum(perm_stats >= observed))) / (n_perm + 1.0)
    passed = p_value > alpha
    rows = (
        ReportRow("dcov^2", observed, float(np.quantile(perm_stats, 1.0 - alpha)),
                  passed, f"p={p_value:.6g}"),
    )
    return TestReport(
        test="independence", scenario=scenario, passed=passed, alpha=alpha,
        max_stat=observed, threshold=float(np.quantile(perm_stats, 1.0 - alpha)),
        rows=rows, seeds=tuple(seeds) or (seed,),
        metrics=(("n_pairs", n), ("n_perm", n_perm), ("p_value", p_value),
                 ("perm_mean", float(perm_stats.mean()))),
    )


def projection_times(horizon, k=4):
    """Default projection times for path-to-vector reduction: quarters of T."""
    return [horizon * (i + 1) / k for i in range(k)]


def project_paths(paths, times):
    """Matrix of path values at fixed times (finite-dimensional projections)."""
    paths = list(paths)
    if not paths:
        raise ValueError("empty path set")
    grid = paths[0].grid
    for p in paths[1:]:
        if not p.grid.same_as(grid):
            raise PathError("paths must share a grid")
    idx = [grid.index_of(t) for t in times]
    return np.stack([p.values[idx] for p in paths])
