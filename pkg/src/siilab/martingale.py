"""Generator-based test processes and Monte Carlo martingale verification.

For a driver path Y the multiplicative test process is

    M_t = f(Y_t) / f(Y_0) * exp(- integral of (Gf)(Y_s, s) / f(Y_s) dA_s)

with G the driver's generator; for a solution path X the additive one is

    K_t = g(X_t) - g(x0) - integral of mu g'(X_s) ds - integral of (Kg)(X, s) dA_s

with K the coefficient-composed generator.  Both are martingales exactly when
the path has the asserted law, which the studentized increment test checks
against adapted functionals.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .paths import CadlagPath, PathError, realized_covariation, joint_jump_mass, state_before
from .report import ReportRow, TestReport


@dataclass(frozen=True)
class TestFunction:
    """Twice continuously differentiable test function with metadata bounds."""

    name: str
    f: object
    df: object
    d2f: object
    bounded: bool = True
    positive_infimum: bool = False
    inf_value: float = 0.0
    sup_value: float = np.inf
    sup_df: float = np.inf
    sup_d2f: float = np.inf


def sin_wave(u=1.0):
    """f(x) = 2 + sin(u x); infimum 1, so usable multiplicatively."""
    return TestFunction(
        name=f"2+sin({u:g}x)",
        f=lambda x: 2.0 + np.sin(u * np.asarray(x, dtype=float)),
        df=lambda x: u * np.cos(u * np.asarray(x, dtype=float)),
        d2f=lambda x: -u * u * np.sin(u * np.asarray(x, dtype=float)),
        positive_infimum=True,
        inf_value=1.0, sup_value=3.0, sup_df=abs(u), sup_d2f=u * u,
    )


def cos_wave(u=1.0):
    """f(x) = 2 + cos(u x); infimum 1."""
    return TestFunction(
        name=f"2+cos({u:g}x)",
        f=lambda x: 2.0 + np.cos(u * np.asarray(x, dtype=float)),
        df=lambda x: -u * np.sin(u * np.asarray(x, dtype=float)),
        d2f=lambda x: -u * u * np.cos(u * np.asarray(x, dtype=float)),
        positive_infimum=True,
        inf_value=1.0, sup_value=3.0, sup_df=abs(u), sup_d2f=u * u,
    )


def bump(center=0.0, halfwidth=1.0, height=1.0):
    """Smooth compactly supported bump; C-infinity with explicit derivatives."""
    c, w, a = float(center), float(halfwidth), float(height) * np.e

    def _z(x):
        return (np.asarray(x, dtype=float) - c) / w

    def _phi_parts(x):
        z = _z(x)
        inside = np.abs(z) < 1.0
        zs = np.where(inside, z, 0.0)
        denom = 1.0 - zs * zs
        phi = np.where(inside, np.exp(-1.0 / np.where(inside, denom, 1.0)), 0.0)
        return z, inside, zs, denom, phi

    def f(x):
        _, _, _, _, phi = _phi_parts(x)
        return a * phi

    def df(x):
        _, inside, zs, denom, phi = _phi_parts(x)
        d = -2.0 * zs / (denom * denom)
        return np.where(inside, a * phi * d / w, 0.0)

    def d2f(x):
        _, inside, zs, denom, phi = _phi_parts(x)
        d = -2.0 * zs / (denom * denom)
        dd = -2.0 / (denom * denom) - 8.0 * zs * zs / (denom * denom * denom)
        return np.where(inside, a * phi * (d * d + dd) / (w * w), 0.0)

    # numeric probe for derivative bounds (metadata only)
    probe = np.linspace(c - w, c + w, 4001)
    return TestFunction(
        name=f"bump({center:g},{halfwidth:g},{height:g})",
        f=f, df=df, d2f=d2f,
        bounded=True, positive_infimum=False,
        inf_value=0.0, sup_value=float(height),
        sup_df=float(np.max(np.abs(df(probe)))),
        sup_d2f=float(np.max(np.abs(d2f(probe)))),
    )


def multiplicative_presets():
    """Wave family used for the driver-law martingale checks."""
    return [sin_wave(1.0), cos_wave(1.0), sin_wave(2.0), cos_wave(2.0)]


def solution_presets():
    """Test functions for the solution-law martingale checks."""
    return [sin_wave(1.0), cos_wave(1.0), sin_wave(2.0), cos_wave(2.0)]


# -- generators --------------------------------------------------------------

def generator_L(f, x, t, chars):
    """Driver generator: b f' + (c/2) f'' + jump difference integral."""
    x_arr = np.asarray(x, dtype=float)
    out = chars.b_at(t) * f.df(x_arr) + 0.5 * chars.c_at(t) * f.d2f(x_arr)
    measure = chars.jumps_at(t)
    if not measure.is_empty:
        thr = chars.truncation.threshold
        y, w = measure.nodes(breaks=(-thr, thr))
        h_y = chars.truncation(y)
        shifted = f.f(x_arr[..., None] + y)
        diff = shifted - f.f(x_arr)[..., None] - np.multiply.outer(f.df(x_arr), h_y)
        out = out + diff @ w
    if not np.all(np.isfinite(np.asarray(out))):
        raise FloatingPointError("jump integral in the generator is non-finite")
    return out if np.ndim(x) else float(out)


def _k_core(g, state, sigma, t, chars):
    """Coefficient-composed generator on arrays of states and sigmas."""
    state = np.asarray(state, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    out = sigma * chars.b_at(t) * g.df(state) + 0.5 * sigma * sigma * chars.c_at(t) * g.d2f(state)
    measure = chars.jumps_at(t)
    if not measure.is_empty:
        thr = chars.truncation.threshold
        y, w = measure.nodes(breaks=(-thr, thr))
        h_y = chars.truncation(y)
        shifted = g.f(state[..., None] + sigma[..., None] * y)
        diff = (shifted - g.f(state)[..., None]
                - sigma[..., None] * np.multiply.outer(g.df(state), h_y))
        out = out + diff @ w
    return out


def operator_K(g, omega, s, chars, spec):
    """Composed generator evaluated along a path at time s (left limits)."""
    state = state_before(omega, s)
    sigma = spec.sigma.at_state(state, s)
    out = _k_core(g, np.array([state]), np.array([sigma]), s, chars)
    if not np.isfinite(out[0]):
        raise FloatingPointError("jump integral in the composed generator is non-finite")
    return float(out[0])


# -- test processes ----------------------------------------------------------

def _integral_rate_table(f, chars, t, lo, hi, n_points=4097):
    """Interpolation table of (Gf)/f for time-constant characteristics."""
    pad = 0.05 * (hi - lo) + 1e-9
    xs = np.linspace(lo - pad, hi + pad, n_points)
    rate = generator_L(f, xs, t, chars) / f.f(xs)
    return xs, rate


def _chars_time_constant(chars):
    return chars.drift.is_constant and chars.diffusion.is_constant and chars.jumps.is_constant


def mf_process(f, y, chars):
    """Multiplicative test process as a path with an exact jump ledger."""
    if not f.positive_infimum:
        raise ValueError("multiplicative test process needs inf f > 0")
    grid = y.grid
    times = grid.times
    n = grid.n_steps
    d_clock = np.diff(chars.clock(times))
    f0 = float(f.f(y.initial))
    lefts = np.array([state_before(y, t) for t in times[:-1]])
    if _chars_time_constant(chars):
        rates = np.asarray(generator_L(f, lefts, 0.0, chars)) / np.asarray(f.f(lefts))
    else:
        rates = np.array([
            float(generator_L(f, lefts[k], times[k], chars)) / float(f.f(lefts[k]))
            for k in range(n)])
    integral = np.concatenate([[0.0], np.cumsum(rates * d_clock)])
    values = np.asarray(f.f(y.values)) / f0 * np.exp(-integral)
    jt, js = [], []
    for tau, size in zip(y.jump_times, y.jump_sizes):
        k = grid.cell_of(tau) - 1
        y_left = y.left_limit(tau)
        i_tau = integral[k] + rates[k] * chars.clock.increment(times[k], tau)
        jump = (float(f.f(y_left + size)) - float(f.f(y_left))) * np.exp(-i_tau) / f0
        if jump != 0.0:
            jt.append(tau)
            js.append(jump)
    return CadlagPath.from_values(grid, values, np.asarray(jt), np.asarray(js))


def mf_value_matrix(f, values, grid, chars, interp_points=4097):
    """Multiplicative test process at grid points for a matrix of paths.

    Uses the right-continuous grid values as the predictable states, which
    agree with left limits almost surely (jump stamps never sit on the grid).
    """
    if not f.positive_infimum:
        raise ValueError("multiplicative test process needs inf f > 0")
    if not _chars_time_constant(chars):
        raise ValueError("matrix fast path needs time-constant characteristics")
    values = np.asarray(values, dtype=float)
    d_clock = np.diff(chars.clock(grid.times))
    lefts = values[:, :-1]
    if interp_points and not chars.jumps_at(0.0).is_empty:
        xs, table = _integral_rate_table(f, chars, 0.0, float(values.min()),
                                         float(values.max()), interp_points)
        rates = np.interp(lefts, xs, table)
    else:
        rates = np.asarray(generator_L(f, lefts, 0.0, chars)) / np.asarray(f.f(lefts))
    integral = np.concatenate(
        [np.zeros((values.shape[0], 1)), np.cumsum(rates * d_clock, axis=1)], axis=1)
    f_vals = np.asarray(f.f(values))
    return f_vals / f_vals[:, :1] * np.exp(-integral)


def kg_process(g, x, spec, chars):
    """Additive test process for a solution path, with an exact jump ledger."""
    grid = x.grid
    times = grid.times
    n = grid.n_steps
    widths = grid.widths
    d_clock = np.diff(chars.clock(times))
    lefts = np.array([state_before(x, t) for t in times[:-1]])
    mus = np.array([spec.mu.at_state(lefts[k], times[k]) for k in range(n)])
    sigmas = np.array([spec.sigma.at_state(lefts[k], times[k]) for k in range(n)])
    if _chars_time_constant(chars):
        k_vals = _k_core(g, lefts, sigmas, 0.0, chars)
    else:
        k_vals = np.array([_k_core(g, lefts[k:k + 1], sigmas[k:k + 1], times[k], chars)[0]
                           for k in range(n)])
    drift_part = np.concatenate([[0.0], np.cumsum(mus * np.asarray(g.df(lefts)) * widths)])
    gen_part = np.concatenate([[0.0], np.cumsum(k_vals * d_clock)])
    values = np.asarray(g.f(x.values)) - float(g.f(x.initial)) - drift_part - gen_part
    jt, js = [], []
    for tau, size in zip(x.jump_times, x.jump_sizes):
        x_left = x.left_limit(tau)
        jump = float(g.f(x_left + size)) - float(g.f(x_left))
        if jump != 0.0:
            jt.append(tau)
            js.append(jump)
    return CadlagPath.from_values(grid, values, np.asarray(jt), np.asarray(js))


def kg_value_matrix(g, values, grid, spec, chars, interp_points=4097):
    """Additive test process at grid points for a matrix of solution paths.

    The jump term is evaluated per distinct sigma value (degenerate and
    constant coefficients produce only a few), falling back to full
    broadcasting otherwise.
    """
    if not _chars_time_constant(chars):
        raise ValueError("matrix fast path needs time-constant characteristics")
    values = np.asarray(values, dtype=float)
    n_paths, n_plus1 = values.shape
    n = n_plus1 - 1
    widths = grid.widths
    d_clock = np.diff(chars.clock(grid.times))
    lefts = values[:, :-1]
    mus = np.empty_like(lefts)
    sigmas = np.empty_like(lefts)
    for k in range(n):
        mus[:, k] = spec.mu.at_state_array(lefts[:, k], grid.times[k])
        sigmas[:, k] = spec.sigma.at_state_array(lefts[:, k], grid.times[k])
    b, c = chars.b_at(0.0), chars.c_at(0.0)
    k_vals = sigmas * b * np.asarray(g.df(lefts)) + 0.5 * sigmas ** 2 * c * np.asarray(g.d2f(lefts))
    measure = chars.jumps_at(0.0)
    if not measure.is_empty:
        distinct = np.unique(sigmas)
        thr = chars.truncation.threshold
        lo, hi = float(lefts.min()), float(lefts.max())
        if interp_points and distinct.size <= 8:
            y, w = measure.nodes(breaks=(-thr, thr))
            h_term = float(np.sum(w * chars.truncation(y)))
            pad = 0.05 * (hi - lo) + 1e-9
            xs = np.linspace(lo - pad, hi + pad, interp_points)
            for s_val in distinct:
                shifted = g.f(xs[:, None] + s_val * y)
                table = (shifted - np.asarray(g.f(xs))[:, None]) @ w - s_val * h_term * np.asarray(g.df(xs))
                sel = sigmas == s_val
                k_vals[sel] += np.interp(lefts[sel], xs, table)
        else:
            k_vals += _k_core(g, lefts, sigmas, 0.0, chars) - (
                sigmas * b * np.asarray(g.df(lefts))
                + 0.5 * sigmas ** 2 * c * np.asarray(g.d2f(lefts)))
    drift_part = np.concatenate(
        [np.zeros((n_paths, 1)), np.cumsum(mus * np.asarray(g.df(lefts)) * widths, axis=1)], axis=1)
    gen_part = np.concatenate(
        [np.zeros((n_paths, 1)), np.cumsum(k_vals * d_clock, axis=1)], axis=1)
    g_vals = np.asarray(g.f(values))
    return g_vals - g_vals[:, :1] - drift_part - gen_part


def mf_bound(f, chars, horizon):
    """A priori bound: (sup f / inf f) * exp(T * sup|Gf| / inf f)."""
    measure = chars.jumps_at(0.0)
    jump_bound = 0.0
    if not measure.is_empty:
        jump_bound = measure.rate * (2.0 * f.sup_value + chars.truncation.threshold * f.sup_df)
    sup_gen = (abs(chars.b_at(0.0)) * f.sup_df + 0.5 * chars.c_at(0.0) * f.sup_d2f + jump_bound)
    a_total = chars.clock.increment(0.0, horizon)
    return (f.sup_value / f.inf_value) * np.exp(a_total * sup_gen / f.inf_value)


# -- statistical tests -------------------------------------------------------

def functional_one():
    return ("1", lambda values, grid, s_idx: np.ones(values.shape[0]))


def functional_tanh_at_s():
    return ("tanh(P_s)", lambda values, grid, s_idx: np.tanh(values[:, s_idx]))


def functional_tanh_at_half_s():
    def fn(values, grid, s_idx):
        half_t = grid.times[s_idx] / 2.0
        j = int(np.searchsorted(grid.times, half_t, side="right") - 1)
        return np.tanh(values[:, j])
    return ("tanh(P_{s/2})", fn)


def default_functionals():
    return [functional_one(), functional_tanh_at_s(), functional_tanh_at_half_s()]


def _as_value_matrix(sample, grid):
    if isinstance(sample, np.ndarray):
        if grid is None:
            raise ValueError("matrix samples need an explicit grid")
        return np.asarray(sample, dtype=float), grid
    paths = list(sample)
    if not paths:
        raise ValueError("empty sample")
    grid = paths[0].grid
    for p in paths[1:]:
        if not p.grid.same_as(grid):
            raise PathError("sample paths must share a grid")
    return np.stack([p.values for p in paths]), grid


def martingale_test(sample, checkpoints=None, functionals=None, *, grid=None,
                    alpha=0.01, bonferroni_extra=1, scenario="", label="process",
                    seeds=()):
    """Studentized conditional-increment test for the martingale property.

    For every checkpoint pair (s, t) and adapted functional F the statistic
    z = mean((P_t - P_s) * F) / se is compared against a two-sided normal
    quantile at the Bonferroni-adjusted level.
    """
    values, grid = _as_value_matrix(sample, grid)
    horizon = grid.horizon
    if checkpoints is None:
        checkpoints = [(0.0, horizon / 2.0), (horizon / 2.0, horizon), (0.0, horizon)]
    if functionals is None:
        functionals = default_functionals()
    n_paths = values.shape[0]
    combos = len(checkpoints) * len(functionals)
    level = alpha / (combos * max(1, bonferroni_extra))
    threshold = float(norm.ppf(1.0 - level / 2.0))
    rows = []
    max_stat = 0.0
    for s, t in checkpoints:
        s_idx = grid.index_of(s)
        t_idx = grid.index_of(t)
        if t_idx <= s_idx:
            raise ValueError("checkpoints need s < t")
        inc = values[:, t_idx] - values[:, s_idx]
        for name, fn in functionals:
            w = inc * fn(values, grid, s_idx)
            mean = float(np.mean(w))
            se = float(np.std(w, ddof=1) / np.sqrt(n_paths)) if n_paths > 1 else 0.0
            if se == 0.0:
                z = 0.0 if mean == 0.0 else np.inf
                detail = "degenerate se" if mean != 0.0 else "constant increments"
            else:
                z = mean / se
                detail = f"mean={mean:.6g} se={se:.6g}"
            rows.append(ReportRow(f"s={s:g},t={t:g},F={name}", abs(z), threshold,
                                  abs(z) <= threshold, detail))
            max_stat = max(max_stat, abs(z))
    passed = all(r.passed for r in rows)
    return TestReport(
        test=f"martingale[{label}]", scenario=scenario, passed=passed, alpha=alpha,
        max_stat=max_stat, threshold=threshold, rows=tuple(rows), seeds=tuple(seeds),
        metrics=(("n_paths", n_paths), ("n_comparisons", combos * max(1, bonferroni_extra))),
    )


def zero_covariation_check(mf, kg, *, scenario="", seeds=()):
    """Covariation decomposition check between two test processes.

    Accepts one (path, path) pair or matched sequences.  The ledger product
    term must vanish identically (disjoint jump times); the continuous term
    is averaged across pairs and must sit within four standard errors of 0.
    """
    mfs = [mf] if isinstance(mf, CadlagPath) else list(mf)
    kgs = [kg] if isinstance(kg, CadlagPath) else list(kg)
    if len(mfs) != len(kgs) or not mfs:
        raise ValueError("need matched nonempty samples")
    jump_masses = np.empty(len(mfs))
    cont_terms = np.empty(len(mfs))
    for i, (m, k) in enumerate(zip(mfs, kgs)):
        jump_masses[i] = joint_jump_mass(m, k)
        cov = realized_covariation(m, k)
        cont_terms[i] = float(np.sum(cov.cont_increments))
    max_jump = float(np.max(jump_masses))
    cont_mean = float(np.mean(cont_terms))
    n = len(mfs)
    cont_se = float(np.std(cont_terms, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    jump_ok = max_jump == 0.0
    if n > 1:
        cont_ok = abs(cont_mean) <= 4.0 * cont_se if cont_se > 0.0 else cont_mean == 0.0
        cont_stat = abs(cont_mean) / cont_se if cont_se > 0.0 else (0.0 if cont_mean == 0.0 else np.inf)
    else:
        cont_ok = True
        cont_stat = 0.0
    rows = (
        ReportRow("jump-product mass", max_jump, 0.0, jump_ok, "must be exactly 0"),
        ReportRow("continuous covariation", cont_stat, 4.0, cont_ok,
                  f"mean={cont_mean:.6g} se={cont_se:.6g} n={n}"),
    )
    return TestReport(
        test="zero-covariation", scenario=scenario, passed=jump_ok and cont_ok,
        max_stat=max(max_jump, cont_stat if np.isfinite(cont_stat) else 1e18),
        threshold=4.0, rows=rows, seeds=tuple(seeds),
        metrics=(("n_pairs", n),),
    )
