"""Grid-sampled cadlag paths with explicit jump ledgers.

A path stores its value at every grid point, a per-cell continuous increment
and a ledger of (time, size) jumps stamped in continuous time, so the
decomposition ``total increment = continuous part + ledger jumps`` is exact
by construction.  All operations are pure; paths are immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PathError(ValueError):
    """Raised for grid mismatches and malformed path data."""


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing times t_0 = 0 < t_1 < ... < t_n = T."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size < 2:
            raise PathError("grid needs at least two times")
        if t[0] != 0.0:
            raise PathError("grid must start at 0")
        if np.any(np.diff(t) <= 0):
            raise PathError("grid times must be strictly increasing")
        object.__setattr__(self, "times", t)

    @classmethod
    def uniform(cls, horizon, n_steps):
        if not horizon > 0:
            raise PathError("horizon must be > 0")
        if n_steps < 1:
            raise PathError("n_steps must be >= 1")
        return cls(np.linspace(0.0, float(horizon), int(n_steps) + 1))

    @property
    def horizon(self):
        return float(self.times[-1])

    @property
    def n_steps(self):
        return self.times.size - 1

    @property
    def widths(self):
        return np.diff(self.times)

    def cell_of(self, tau):
        """1-based index j of the cell (t_{j-1}, t_j] containing tau."""
        if not 0.0 < tau <= self.horizon:
            raise PathError(f"time {tau} outside (0, {self.horizon}]")
        return int(np.searchsorted(self.times, tau, side="left"))

    def index_of(self, t, tol=1e-12):
        """Index of a grid point equal to t (within tol)."""
        k = int(np.searchsorted(self.times, t))
        for j in (k - 1, k, k + 1):
            if 0 <= j < self.times.size and abs(self.times[j] - t) <= tol:
                return j
        raise PathError(f"{t} is not a grid time")

    def same_as(self, other):
        return self.times.shape == other.times.shape and np.array_equal(self.times, other.times)


@dataclass(frozen=True)
class CadlagPath:
    """Right-continuous path on a grid with an exact jump ledger."""

    grid: TimeGrid
    values: np.ndarray
    cont_increments: np.ndarray
    jump_times: np.ndarray = field(default_factory=lambda: np.empty(0))
    jump_sizes: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        c = np.asarray(self.cont_increments, dtype=float)
        jt = np.asarray(self.jump_times, dtype=float)
        js = np.asarray(self.jump_sizes, dtype=float)
        if v.shape != self.grid.times.shape:
            raise PathError("values must have one entry per grid point")
        if c.shape != (self.grid.n_steps,):
            raise PathError("need one continuous increment per cell")
        if jt.shape != js.shape or jt.ndim != 1:
            raise PathError("jump times and sizes must be matching vectors")
        if jt.size:
            if np.any(np.diff(jt) <= 0):
                raise PathError("jump times must be strictly increasing")
            if jt[0] <= 0.0 or jt[-1] > self.grid.horizon:
                raise PathError("jump times must lie in (0, T]")
            if np.any(js == 0.0):
                raise PathError("jump sizes must be nonzero")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "cont_increments", c)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "jump_sizes", js)

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_increments(cls, grid, initial, cont_increments, jump_times=(), jump_sizes=()):
        """Build values by accumulating continuous increments and ledger jumps."""
        cont = np.asarray(cont_increments, dtype=float)
        jt = np.asarray(jump_times, dtype=float)
        js = np.asarray(jump_sizes, dtype=float)
        cell_jump = np.zeros(grid.n_steps)
        if jt.size:
            if jt[0] <= 0.0 or jt[-1] > grid.horizon:
                raise PathError("jump times must lie in (0, T]")
            cells = np.searchsorted(grid.times, jt, side="left") - 1
            np.add.at(cell_jump, cells, js)
        values = np.empty(grid.n_steps + 1)
        values[0] = float(initial)
        np.cumsum(cont + cell_jump, out=values[1:])
        values[1:] += values[0]
        return cls(grid, values, cont, jt, js)

    @classmethod
    def from_values(cls, grid, values, jump_times=(), jump_sizes=()):
        """Derive continuous increments as the residual of total minus jumps."""
        values = np.asarray(values, dtype=float)
        jt = np.asarray(jump_times, dtype=float)
        js = np.asarray(jump_sizes, dtype=float)
        cell_jump = np.zeros(grid.n_steps)
        if jt.size:
            cells = np.searchsorted(grid.times, jt, side="left") - 1
            np.add.at(cell_jump, cells, js)
        cont = np.diff(values) - cell_jump
        return cls(grid, values, cont, jt, js)

    # -- basic queries -----------------------------------------------------

    @property
    def initial(self):
        return float(self.values[0])

    def increment(self, j):
        """Total increment over cell j (1-based)."""
        if not 1 <= j <= self.grid.n_steps:
            raise PathError(f"cell index {j} out of range")
        return float(self.values[j] - self.values[j - 1])

    def jumps_in_cell(self, j):
        """Ledger slice for cell j (1-based)."""
        lo = np.searchsorted(self.jump_times, self.grid.times[j - 1], side="right")
        hi = np.searchsorted(self.jump_times, self.grid.times[j], side="right")
        return self.jump_times[lo:hi], self.jump_sizes[lo:hi]

    def left_limit(self, tau):
        """Value just before tau: cell-left value, interpolated continuous part,
        plus ledger jumps strictly before tau."""
        j = self.grid.cell_of(tau)
        t_lo = self.grid.times[j - 1]
        width = self.grid.times[j] - t_lo
        out = self.values[j - 1] + self.cont_increments[j - 1] * (tau - t_lo) / width
        lo = np.searchsorted(self.jump_times, t_lo, side="right")
        hi = np.searchsorted(self.jump_times, tau, side="left")
        if hi > lo:
            out += self.jump_sizes[lo:hi].sum()
        return float(out)

    def value_at(self, tau):
        """Right-continuous value at tau (includes a ledger jump at tau)."""
        if tau == 0.0:
            return self.initial
        out = self.left_limit(tau)
        k = np.searchsorted(self.jump_times, tau, side="left")
        if k < self.jump_times.size and self.jump_times[k] == tau:
            out += self.jump_sizes[k]
        return float(out)

    def decomposition_residual(self):
        """Max defect of total = continuous + jumps across cells (0 up to fp)."""
        cell_jump = np.zeros(self.grid.n_steps)
        if self.jump_times.size:
            cells = np.searchsorted(self.grid.times, self.jump_times, side="left") - 1
            np.add.at(cell_jump, cells, self.jump_sizes)
        defect = np.diff(self.values) - self.cont_increments - cell_jump
        return float(np.max(np.abs(defect))) if defect.size else 0.0


def state_before(path, t):
    """Path state readable by a predictable coefficient at time t."""
    if t == 0.0:
        return path.initial
    return path.left_limit(t)


def _matched_jumps(p, q):
    common, ip, iq = np.intersect1d(p.jump_times, q.jump_times, return_indices=True)
    return common, p.jump_sizes[ip], q.jump_sizes[iq]


def realized_covariation(p, q):
    """Running covariation path: continuous-part increment products per cell
    plus jump-size products at exactly matching ledger times."""
    if not p.grid.same_as(q.grid):
        raise PathError("paths must share a grid")
    cont = p.cont_increments * q.cont_increments
    times, sp, sq = _matched_jumps(p, q)
    prods = sp * sq
    keep = prods != 0.0
    return CadlagPath.from_increments(p.grid, 0.0, cont, times[keep], prods[keep])


def joint_jump_mass(p, q):
    """Sum of |jump product| over exactly matching ledger times."""
    _, sp, sq = _matched_jumps(p, q)
    return float(np.abs(sp * sq).sum()) if sp.size else 0.0


def write_path_table(path, stream, delimiter=","):
    """Delimited table of (time, value) rows."""
    stream.write(f"time{delimiter}value\n")
    for t, v in zip(path.grid.times, path.values):
        stream.write(f"{t:.17g}{delimiter}{v:.17g}\n")


def write_jump_table(path, stream, delimiter=","):
    """Delimited table of the jump ledger (time, size)."""
    stream.write(f"time{delimiter}size\n")
    for t, s in zip(path.jump_times, path.jump_sizes):
        stream.write(f"{t:.17g}{delimiter}{s:.17g}\n")
