"""Splicing a fresh driver copy into the degenerate set of the noise
coefficient, and recovering the original driver from the solution.

The spliced path V takes the fresh copy U wherever sigma(X) is nonzero and
the original driver L wherever sigma(X) vanishes; the recovery inverts the
solution increments through the same nonzero-sigma mask.
"""

from __future__ import annotations

import numpy as np

from .paths import CadlagPath, PathError, state_before


class DualConstructionError(RuntimeError):
    """Mask and coefficients disagree; signals a predictability bug."""


class SplicingMask:
    """Per-cell and per-stamp indicator of sigma(X) != 0 along a given path.

    The cell decision is made at the cell's left endpoint; stamp decisions use
    the left limit of X at the stamp.  One mask instance is computed from X
    and shared by the splice and the recovery so both sides see the same
    indicator.
    """

    def __init__(self, x_path, spec, invert=False):
        self.x_path = x_path
        self.spec = spec
        self.invert = invert
        grid = x_path.grid
        cells = np.empty(grid.n_steps, dtype=bool)
        for k in range(grid.n_steps):
            t_k = grid.times[k]
            sig = spec.sigma.at_state(state_before(x_path, t_k), t_k)
            cells[k] = not spec.sigma_is_zero(sig)
        if invert:
            cells = ~cells
        self.cell_mask = cells
        self._stamp_cache = {}

    def at_time(self, tau):
        hit = self._stamp_cache.get(tau)
        if hit is None:
            sig = self.spec.sigma.at_state(self.x_path.left_limit(tau), tau)
            hit = not self.spec.sigma_is_zero(sig)
            if self.invert:
                hit = not hit
            self._stamp_cache[tau] = hit
        return hit

    def inverted(self):
        """Flipped mask; only useful as a deliberately broken control."""
        return SplicingMask(self.x_path, self.spec, invert=not self.invert)


def splicing_mask(x_path, spec):
    return SplicingMask(x_path, spec)


def construct_v(x, spec, u, l, mask=None):
    """Spliced path: U's increments where the mask is on, L's where off.

    Continuous cell increments follow the cell mask; ledger jumps follow the
    stamp mask, so U's and L's ledgers are partitioned rather than mixed.
    """
    if not (x.grid.same_as(u.grid) and x.grid.same_as(l.grid)):
        raise PathError("paths must share a grid")
    if mask is None:
        mask = SplicingMask(x, spec)
    cont = np.where(mask.cell_mask, u.cont_increments, l.cont_increments)
    times = []
    sizes = []
    for tau, size in zip(u.jump_times, u.jump_sizes):
        if mask.at_time(tau):
            times.append(tau)
            sizes.append(size)
    for tau, size in zip(l.jump_times, l.jump_sizes):
        if not mask.at_time(tau):
            times.append(tau)
            sizes.append(size)
    order = np.argsort(times, kind="stable") if times else []
    jt = np.asarray(times, dtype=float)[order] if times else np.empty(0)
    js = np.asarray(sizes, dtype=float)[order] if times else np.empty(0)
    return CadlagPath.from_increments(x.grid, 0.0, cont, jt, js)


def recover_driver(x, spec, v, mask=None):
    """Rebuild the driver from the solution and the spliced path.

    On mask-on cells the continuous increment is (dX - mu dt) / sigma with
    the same left-endpoint coefficients the solver used; on mask-off cells it
    is V's.  X's ledger jumps divided by sigma at their left limits supply
    the mask-on jumps, V's ledger the mask-off ones.
    """
    if not x.grid.same_as(v.grid):
        raise PathError("paths must share a grid")
    if mask is None:
        mask = SplicingMask(x, spec)
    grid = x.grid
    widths = grid.widths
    cont = np.empty(grid.n_steps)
    for k in range(grid.n_steps):
        t_k = grid.times[k]
        if mask.cell_mask[k]:
            state = state_before(x, t_k)
            sig = spec.sigma.at_state(state, t_k)
            if spec.sigma_is_zero(sig):
                raise DualConstructionError(
                    f"mask is on at t={t_k} but sigma evaluates to 0")
            mu = spec.mu.at_state(state, t_k)
            cont[k] = (x.cont_increments[k] - mu * widths[k]) / sig
        else:
            cont[k] = v.cont_increments[k]
    times = []
    sizes = []
    for tau, size in zip(x.jump_times, x.jump_sizes):
        sig = spec.sigma.at_state(x.left_limit(tau), tau)
        if spec.sigma_is_zero(sig):
            raise DualConstructionError(
                f"solution jumps at t={tau} where sigma evaluates to 0")
        times.append(tau)
        sizes.append(size / sig)
    for tau, size in zip(v.jump_times, v.jump_sizes):
        if not mask.at_time(tau):
            times.append(tau)
            sizes.append(size)
    order = np.argsort(times, kind="stable") if times else []
    jt = np.asarray(times, dtype=float)[order] if times else np.empty(0)
    js = np.asarray(sizes, dtype=float)[order] if times else np.empty(0)
    return CadlagPath.from_increments(grid, 0.0, cont, jt, js)
