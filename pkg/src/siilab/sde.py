"""Predictable coefficients, the jump-adapted Euler solver, and the
integrability process of a driven equation dX = mu(X) dt + sigma(X) dL.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as expr_mod
from .expr import ExpressionEvalError
from .paths import CadlagPath, PathError, state_before


class CoefficientError(RuntimeError):
    """Coefficient evaluation failed at runtime."""


class QuadratureError(RuntimeError):
    """A jump integral came out non-finite instead of being silently kept."""


class CoefficientFunctional:
    """Coefficient reading only the path strictly before t (left limits) and t.

    Backed by a function of (left-limit state, time); evaluating through a
    path goes via ``state_before`` so predictability holds structurally.
    Division-free expressions skip the floating-point trap setup, which keeps
    the solver's inner loop fast.
    """

    def __init__(self, fn, source=None, name=None, guarded=True):
        self._fn = fn
        self._guarded = guarded
        self.source = source
        self.name = name or source or "coefficient"

    @classmethod
    def from_expression(cls, text):
        ast = expr_mod.parse_expression(text)
        compiled = expr_mod.compile_expression(ast)
        canonical = expr_mod.to_source(ast)
        return cls(compiled, source=canonical, name=canonical,
                   guarded=expr_mod.contains_division(ast))

    @classmethod
    def constant(cls, value):
        v = float(value)
        return cls(lambda x, t: v, source=repr(v), name=repr(v), guarded=False)

    @classmethod
    def from_state_function(cls, fn, name="custom"):
        return cls(fn, name=name)

    def at_state(self, x_left, t):
        if self._guarded:
            try:
                out = expr_mod.evaluate(self._fn, x_left, t)
            except (ExpressionEvalError, ZeroDivisionError, FloatingPointError) as exc:
                raise CoefficientError(str(exc)) from exc
        else:
            out = float(self._fn(x_left, t))
        if out != out or out in (float("inf"), float("-inf")):
            raise CoefficientError(f"non-finite coefficient at t={t}")
        return out

    def at_state_array(self, x_left, t):
        x_left = np.asarray(x_left, dtype=float)
        try:
            if self._guarded:
                out = expr_mod.evaluate(self._fn, x_left, t)
            else:
                out = np.broadcast_to(
                    np.asarray(self._fn(x_left, t), dtype=float), x_left.shape).copy()
        except (ExpressionEvalError, ZeroDivisionError, FloatingPointError) as exc:
            raise CoefficientError(str(exc)) from exc
        if not np.all(np.isfinite(out)):
            raise CoefficientError(f"non-finite coefficient at t={t}")
        return out

    def __call__(self, path, t):
        return self.at_state(state_before(path, t), t)


@dataclass(frozen=True)
class SdeSpec:
    """Initial value plus drift and noise coefficients.

    ``zero_tolerance`` controls degenerate-noise detection; the default is
    exact floating-point equality with 0, which indicator-style coefficients
    produce structurally.
    """

    x0: float
    mu: CoefficientFunctional
    sigma: CoefficientFunctional
    zero_tolerance: float = 0.0

    @classmethod
    def from_expressions(cls, x0, mu, sigma, zero_tolerance=0.0):
        return cls(float(x0), CoefficientFunctional.from_expression(mu),
                   CoefficientFunctional.from_expression(sigma), zero_tolerance)

    def sigma_is_zero(self, value):
        if self.zero_tolerance == 0.0:
            return value == 0.0
        return abs(value) <= self.zero_tolerance


def solve_sde(spec, driver, chars=None):
    """Jump-adapted Euler solution sharing the driver's grid.

    Per cell the state advances by mu * dt + sigma * (continuous driver
    increment) with both coefficients evaluated at the cell's left endpoint;
    each driver ledger jump adds sigma(left limit at the stamp) * jump size
    at the exact stamp time.  The cell's continuous advance is a single
    frozen-coefficient term, which lets the driver be recovered from the
    solution exactly (up to floating-point residue).
    """
    grid = driver.grid
    times = grid.times.tolist()
    widths = grid.widths.tolist()
    n = grid.n_steps
    values = np.empty(n + 1)
    values[0] = spec.x0
    cont = np.empty(n)
    out_jt = []
    out_js = []
    jt = driver.jump_times.tolist()
    js = driver.jump_sizes.tolist()
    # cell boundaries in the ledger, computed once
    cell_hi = np.searchsorted(driver.jump_times, grid.times[1:], side="right").tolist()
    driver_cont = driver.cont_increments.tolist()
    mu_at = spec.mu.at_state
    sigma_at = spec.sigma.at_state
    state_left = spec.x0  # left limit of X at the current cell's left endpoint
    running = spec.x0
    lo = 0
    for k in range(n):
        t_k = times[k]
        width = widths[k]
        adv = mu_at(state_left, t_k) * width + sigma_at(state_left, t_k) * driver_cont[k]
        hi = cell_hi[k]
        start = running
        jump_total = 0.0
        last_jump = 0.0
        last_stamp = -1.0
        for idx in range(lo, hi):
            tau = jt[idx]
            x_left = start + adv * (tau - t_k) / width + jump_total
            jump_x = sigma_at(x_left, tau) * js[idx]
            if jump_x != 0.0:
                out_jt.append(tau)
                out_js.append(jump_x)
            jump_total += jump_x
            last_jump = jump_x
            last_stamp = tau
        lo = hi
        cont[k] = adv
        running = start + adv + jump_total
        values[k + 1] = running
        # the state a predictable coefficient sees at the next grid time
        # excludes a jump landing exactly on it
        if last_stamp == times[k + 1]:
            state_left = running - last_jump
        else:
            state_left = running
    return CadlagPath(grid, values, cont, np.array(out_jt), np.array(out_js))


@dataclass(frozen=True)
class ZProcess:
    """Running summands of the integral-wellposedness process.

    drift_term:        integral of |mu| dt
    diffusion_term:    integral of (sigma^2 c + small-jump square mass) dA
    compensation_term: integral of |sigma b + truncation mismatch| dA
    """

    grid: object
    drift_term: np.ndarray
    diffusion_term: np.ndarray
    compensation_term: np.ndarray

    @property
    def total(self):
        return self.drift_term + self.diffusion_term + self.compensation_term

    def final(self):
        return float(self.total[-1])


def z_process(spec, chars, x_path):
    """Accumulate the three summands along a solution path (left endpoints)."""
    grid = x_path.grid
    times = grid.times
    n = grid.n_steps
    s1 = np.zeros(n + 1)
    s2 = np.zeros(n + 1)
    s3 = np.zeros(n + 1)
    thr = chars.truncation.threshold
    d_clock = np.diff(chars.clock(times))
    for k in range(n):
        t_k = times[k]
        state = state_before(x_path, t_k)
        mu_k = spec.mu.at_state(state, t_k)
        sig_k = spec.sigma.at_state(state, t_k)
        c_k = chars.c_at(t_k)
        b_k = chars.b_at(t_k)
        measure = chars.jumps_at(t_k)
        if measure.is_empty:
            small_sq = 0.0
            mismatch = 0.0
        else:
            breaks = [-1.0, 1.0, -thr, thr]
            if sig_k != 0.0:
                breaks += [-1.0 / abs(sig_k), 1.0 / abs(sig_k)]
            small_sq = measure.expect(
                lambda y: np.minimum(1.0, (sig_k * y) ** 2) * (np.abs(y) <= 1.0),
                breaks=breaks)
            h = chars.truncation
            mismatch = measure.expect(
                lambda y: sig_k * y * ((np.abs(y) <= 1.0) & (np.abs(sig_k * y) <= 1.0))
                - sig_k * h(y),
                breaks=breaks)
        term2 = sig_k * sig_k * c_k + small_sq
        term3 = abs(sig_k * b_k + mismatch)
        if not (np.isfinite(term2) and np.isfinite(term3)):
            raise QuadratureError(f"divergent jump integral at t={t_k}")
        s1[k + 1] = s1[k] + abs(mu_k) * (times[k + 1] - t_k)
        s2[k + 1] = s2[k] + term2 * d_clock[k]
        s3[k + 1] = s3[k] + term3 * d_clock[k]
    return ZProcess(grid, s1, s2, s3)
