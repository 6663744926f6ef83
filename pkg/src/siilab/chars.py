"""Local characteristics (b, c, F; A) of an independent-increment driver.

The drift density ``b`` and diffusion density ``c`` are taken against the
clock ``A``, the jump kernel ``F`` is finite-activity (total rate times a
jump-size distribution), and a truncation function splits jumps into a
compensated small part and a raw large part.  Everything is immutable after
construction and safe to share across workers.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)
_MAX_SEGMENT = 1.5  # quadrature pieces short enough for oscillatory integrands
_GAUSS_TAIL_SIGMAS = 12.0


class CharacteristicsError(ValueError):
    """Raised when a characteristics object violates its contract."""


@dataclass(frozen=True)
class TruncationFunction:
    """Canonical truncation h(y) = y * 1{|y| <= threshold}."""

    threshold: float = 1.0

    def __post_init__(self):
        if not self.threshold > 0:
            raise CharacteristicsError("truncation threshold must be > 0")

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        out = np.where(np.abs(y) <= self.threshold, y, 0.0)
        return out if out.ndim else float(out)

    def complement(self, y):
        """The large-jump part h*(y) = y - h(y)."""
        y = np.asarray(y, dtype=float)
        out = np.where(np.abs(y) <= self.threshold, 0.0, y)
        return out if out.ndim else float(out)


def _piecewise_quadrature(lo, hi, breaks, pdf):
    """Gauss-Legendre nodes/weights for integrating g(y)*pdf(y) over [lo, hi].

    The domain is split at ``breaks`` (discontinuity points of downstream
    integrands) and long pieces are subdivided so oscillatory integrands stay
    resolved.
    """
    edges = [lo, hi] + [b for b in breaks if lo < b < hi]
    edges = sorted(set(edges))
    nodes, weights = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        n_sub = max(1, int(np.ceil((b - a) / _MAX_SEGMENT)))
        for i in range(n_sub):
            s0 = a + (b - a) * i / n_sub
            s1 = a + (b - a) * (i + 1) / n_sub
            half = 0.5 * (s1 - s0)
            mid = 0.5 * (s0 + s1)
            y = mid + half * _GL_NODES
            nodes.append(y)
            weights.append(half * _GL_WEIGHTS * pdf(y))
    return np.concatenate(nodes), np.concatenate(weights)


class JumpSizeDistribution:
    """Distribution of a single jump size; never yields exactly zero."""

    def sample(self, generator, n):
        raise NotImplementedError

    def quad_nodes(self, breaks=()):
        """Nodes y_i and weights w_i with E[g(Y)] ~= sum_i w_i g(y_i)."""
        raise NotImplementedError

    def describe(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantSize(JumpSizeDistribution):
    value: float

    def __post_init__(self):
        if self.value == 0.0:
            raise CharacteristicsError("jump size must be nonzero")

    def sample(self, generator, n):
        return np.full(n, self.value, dtype=float)

    def quad_nodes(self, breaks=()):
        return np.array([self.value]), np.array([1.0])

    def mass_points(self):
        return {self.value: 1.0}

    def describe(self):
        return f"constant({self.value:g})"


@dataclass(frozen=True)
class UniformSize(JumpSizeDistribution):
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise CharacteristicsError("uniform jump sizes need lo < hi")

    def sample(self, generator, n):
        out = generator.uniform(self.lo, self.hi, size=n)
        while np.any(out == 0.0):  # F({0}) = 0; a.s. never triggers
            bad = out == 0.0
            out[bad] = generator.uniform(self.lo, self.hi, size=int(bad.sum()))
        return out

    def quad_nodes(self, breaks=()):
        dens = 1.0 / (self.hi - self.lo)
        return _piecewise_quadrature(self.lo, self.hi, breaks, lambda y: np.full_like(y, dens))

    def density(self, y):
        y = np.asarray(y, dtype=float)
        return np.where((y >= self.lo) & (y <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def describe(self):
        return f"uniform({self.lo:g}, {self.hi:g})"


@dataclass(frozen=True)
class GaussianSize(JumpSizeDistribution):
    """Normal jump sizes conditioned to be nonzero (a null condition)."""

    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise CharacteristicsError("gaussian jump sizes need std > 0")

    def sample(self, generator, n):
        out = generator.normal(self.mean, self.std, size=n)
        while np.any(out == 0.0):
            bad = out == 0.0
            out[bad] = generator.normal(self.mean, self.std, size=int(bad.sum()))
        return out

    def quad_nodes(self, breaks=()):
        lo = self.mean - _GAUSS_TAIL_SIGMAS * self.std
        hi = self.mean + _GAUSS_TAIL_SIGMAS * self.std

        def pdf(y):
            z = (y - self.mean) / self.std
            return np.exp(-0.5 * z * z) / (self.std * np.sqrt(2.0 * np.pi))

        return _piecewise_quadrature(lo, hi, breaks, pdf)

    def density(self, y):
        z = (np.asarray(y, dtype=float) - self.mean) / self.std
        return np.exp(-0.5 * z * z) / (self.std * np.sqrt(2.0 * np.pi))

    def describe(self):
        return f"gaussian({self.mean:g}, {self.std:g})"


@dataclass(frozen=True)
class MixtureSize(JumpSizeDistribution):
    """Weighted mixture of size distributions (used to add jump measures)."""

    components: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.components) != len(self.weights) or not self.components:
            raise CharacteristicsError("mixture needs matching components and weights")
        if abs(sum(self.weights) - 1.0) > 1e-12:
            raise CharacteristicsError("mixture weights must sum to 1")

    def sample(self, generator, n):
        choice = generator.choice(len(self.components), size=n, p=np.asarray(self.weights))
        out = np.empty(n, dtype=float)
        for i, comp in enumerate(self.components):
            idx = np.nonzero(choice == i)[0]
            if idx.size:
                out[idx] = comp.sample(generator, idx.size)
        return out

    def quad_nodes(self, breaks=()):
        nodes, weights = [], []
        for comp, w in zip(self.components, self.weights):
            y, ww = comp.quad_nodes(breaks)
            nodes.append(y)
            weights.append(w * ww)
        return np.concatenate(nodes), np.concatenate(weights)

    def describe(self):
        parts = ", ".join(f"{w:g}*{c.describe()}" for c, w in zip(self.components, self.weights))
        return f"mixture({parts})"


@dataclass(frozen=True)
class JumpMeasure:
    """Finite-activity jump measure: total rate times a size distribution."""

    rate: float = 0.0
    sizes: JumpSizeDistribution | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.rate < 0:
            raise CharacteristicsError("jump rate must be >= 0")
        if self.rate > 0 and self.sizes is None:
            raise CharacteristicsError("positive jump rate needs a size distribution")

    @classmethod
    def empty(cls):
        return cls(0.0, None)

    @property
    def is_empty(self):
        return self.rate == 0.0 or self.sizes is None

    def sample_sizes(self, generator, n):
        if self.is_empty:
            raise CharacteristicsError("empty jump measure has no sizes")
        return self.sizes.sample(generator, n)

    def nodes(self, breaks=()):
        """Quadrature (y_i, w_i) with integral F(g) ~= sum w_i g(y_i)."""
        if self.is_empty:
            return np.empty(0), np.empty(0)
        key = tuple(round(float(b), 12) for b in sorted(breaks))
        hit = self._cache.get(key)
        if hit is None:
            y, w = self.sizes.quad_nodes(breaks)
            hit = (y, self.rate * w)
            self._cache[key] = hit
        return hit

    def expect(self, fn, breaks=()):
        """Integral of fn against the measure (rate-weighted expectation)."""
        if self.is_empty:
            return 0.0
        y, w = self.nodes(breaks)
        vals = np.asarray(fn(y))
        total = np.sum(w * vals)
        return complex(total) if np.iscomplexobj(vals) else float(total)

    def one_cut_integral(self):
        """The square-truncated mass: integral of (1 ^ y^2) against F."""
        hit = self._cache.get("one_cut")
        if hit is None:
            hit = self.expect(lambda y: np.minimum(1.0, y * y), breaks=(-1.0, 1.0))
            self._cache["one_cut"] = hit
        return hit

    def truncation_compensator(self, truncation):
        """Integral of h against F (the small-jump drift compensator)."""
        key = ("hcomp", truncation.threshold)
        hit = self._cache.get(key)
        if hit is None:
            thr = truncation.threshold
            hit = self.expect(truncation, breaks=(-thr, thr))
            self._cache[key] = hit
        return hit

    def combine(self, other):
        """Superposition of two finite-activity measures."""
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        total = self.rate + other.rate
        mix = MixtureSize((self.sizes, other.sizes), (self.rate / total, other.rate / total))
        return JumpMeasure(total, mix)

    def describe(self):
        if self.is_empty:
            return "none"
        return f"rate {self.rate:g} x {self.sizes.describe()}"


@dataclass(frozen=True)
class TimeScale:
    """The clock A: identity by default, or a piecewise-linear table."""

    times: tuple | None = None
    points: tuple | None = None

    def __post_init__(self):
        if (self.times is None) != (self.points is None):
            raise CharacteristicsError("table clock needs both times and values")
        if self.times is not None:
            t = np.asarray(self.times, dtype=float)
            a = np.asarray(self.points, dtype=float)
            if t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
                raise CharacteristicsError("clock table times must increase from 0")
            if a[0] != 0.0 or np.any(np.diff(a) < 0):
                raise CharacteristicsError("A not nondecreasing")

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_table(cls, pairs):
        pairs = [(float(t), float(a)) for t, a in pairs]
        return cls(tuple(t for t, _ in pairs), tuple(a for _, a in pairs))

    @property
    def is_identity(self):
        return self.times is None

    def __call__(self, t):
        if self.is_identity:
            return np.asarray(t, dtype=float) if np.ndim(t) else float(t)
        t_arr = np.asarray(t, dtype=float)
        ts = np.asarray(self.times)
        vs = np.asarray(self.points)
        # extend past the table with the final slope
        slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])
        out = np.interp(t_arr, ts, vs)
        beyond = t_arr > ts[-1]
        out = np.where(beyond, vs[-1] + slope * (t_arr - ts[-1]), out)
        return out if out.ndim else float(out)

    def increment(self, s, t):
        return self(t) - self(s)

    def breakpoints(self, horizon):
        if self.is_identity:
            return []
        return [t for t in self.times if 0.0 < t < horizon]


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-open piecewise-constant table: value[i] holds on [time[i], time[i+1])."""

    times: tuple
    values: tuple

    def __post_init__(self):
        if len(self.times) != len(self.values) or not self.times:
            raise CharacteristicsError("piecewise table needs matching times and values")
        if self.times[0] != 0.0 or any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise CharacteristicsError("piecewise table times must increase from 0")

    @classmethod
    def constant(cls, value):
        return cls((0.0,), (value,))

    @property
    def is_constant(self):
        return len(self.values) == 1

    def at(self, t):
        idx = bisect.bisect_right(self.times, t) - 1
        return self.values[max(idx, 0)]

    def breakpoints(self, horizon):
        return [t for t in self.times if 0.0 < t < horizon]


def _as_table(value, wrap=float):
    if isinstance(value, PiecewiseConstant):
        return value
    return PiecewiseConstant.constant(wrap(value) if wrap else value)


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    drift_integral: float
    jump_integral: float
    violations: tuple = ()


@dataclass(frozen=True)
class LocalCharacteristics:
    """The quadruple (b, c, F; A) plus the truncation function."""

    drift: PiecewiseConstant
    diffusion: PiecewiseConstant
    jumps: PiecewiseConstant
    clock: TimeScale = field(default_factory=TimeScale.identity)
    truncation: TruncationFunction = field(default_factory=TruncationFunction)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @classmethod
    def constant(cls, b, c, jumps=None, clock=None, truncation=None):
        return cls(
            drift=_as_table(b),
            diffusion=_as_table(c),
            jumps=_as_table(jumps if jumps is not None else JumpMeasure.empty(), wrap=None),
            clock=clock if clock is not None else TimeScale.identity(),
            truncation=truncation if truncation is not None else TruncationFunction(),
        )

    def b_at(self, t):
        return self.drift.at(t)

    def c_at(self, t):
        return self.diffusion.at(t)

    def jumps_at(self, t):
        return self.jumps.at(t)

    def segment_edges(self, horizon):
        """All breakpoints of (b, c, F, A) in (0, horizon), plus the endpoints."""
        edges = {0.0, float(horizon)}
        for table in (self.drift, self.diffusion, self.jumps):
            edges.update(table.breakpoints(horizon))
        edges.update(self.clock.breakpoints(horizon))
        return sorted(edges)

    def validate(self, horizon, probe_sampler=True):
        """Numerically check the integrability conditions up to ``horizon``."""
        if not horizon > 0:
            raise ValueError("horizon must be > 0")
        key = ("validate", float(horizon), probe_sampler)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        violations = []
        for c in self.diffusion.values:
            if c < 0:
                violations.append("negative c")
                break
        edges = self.segment_edges(horizon)
        drift_integral = 0.0
        jump_integral = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            da = self.clock.increment(a, b)
            if da < 0:
                violations.append("A not nondecreasing")
                da = 0.0
            drift_integral += abs(self.b_at(a)) * da
            jump_integral += self.jumps_at(a).one_cut_integral() * da
        if not (np.isfinite(drift_integral) and np.isfinite(jump_integral)):
            violations.append("non-finite integrability integrals")
        if probe_sampler:
            probe = np.random.Generator(np.random.Philox(20260101))
            for measure in self.jumps.values:
                if not measure.is_empty and np.any(measure.sample_sizes(probe, 256) == 0.0):
                    violations.append("F sampler emitting 0")
        result = ValidationResult(not violations, drift_integral, jump_integral,
                                  tuple(violations))
        self._cache[key] = result
        return result


def levy_exponent(chars, u, t=0.0):
    """Characteristic exponent psi_t(u) of the driver at clock density time t.

    psi_t(u) = i u b_t - u^2 c_t / 2 + integral of
    (exp(iuy) - 1 - i u h(y)) against F_t.
    """
    u_arr = np.asarray(u, dtype=float)
    b = chars.b_at(t)
    c = chars.c_at(t)
    out = 1j * u_arr * b - 0.5 * u_arr * u_arr * c
    measure = chars.jumps_at(t)
    if not measure.is_empty:
        thr = chars.truncation.threshold
        y, w = measure.nodes(breaks=(-thr, thr))
        h_y = chars.truncation(y)
        phase = np.exp(1j * np.multiply.outer(u_arr, y))
        integrand = phase - 1.0 - 1j * np.multiply.outer(u_arr, h_y)
        out = out + integrand @ w
    return out if out.ndim else complex(out)


def integrated_exponent(chars, u, t):
    """Clock-weighted accumulation of the exponent over [0, t].

    Exact for piecewise-constant (b, c, F) against a piecewise-linear clock;
    reduces to t * psi(u) for time-constant characteristics with the identity
    clock.
    """
    u_arr = np.asarray(u, dtype=float)
    if t == 0.0:
        zero = np.zeros_like(u_arr, dtype=complex)
        return zero if zero.ndim else 0j
    if t < 0:
        raise ValueError("t must be >= 0")
    edges = chars.segment_edges(t)
    total = np.zeros(u_arr.shape, dtype=complex) if u_arr.ndim else 0j
    for a, b in zip(edges[:-1], edges[1:]):
        total = total + levy_exponent(chars, u_arr, a) * chars.clock.increment(a, b)
    return total if np.ndim(total) else complex(total)


@dataclass(frozen=True)
class BivariateCharacteristics:
    """Two independent copies sharing one clock.

    Drift pair (b, b), diagonal diffusion diag(c, c), and a jump measure
    concentrated on the coordinate axes: F(dx) delta_0(dy) + delta_0(dx) F(dy).
    """

    marginal: LocalCharacteristics

    def drift_pair(self, t=0.0):
        b = self.marginal.b_at(t)
        return (b, b)

    def diffusion_matrix(self, t=0.0):
        c = self.marginal.c_at(t)
        return ((c, 0.0), (0.0, c))

    def joint_jump_expect(self, fn2d, t=0.0):
        """Integral of fn2d(x, y) against the axis-supported joint measure."""
        measure = self.marginal.jumps_at(t)
        if measure.is_empty:
            return 0.0
        thr = self.marginal.truncation.threshold
        y, w = measure.nodes(breaks=(-thr, thr))
        zero = np.zeros_like(y)
        return float(np.sum(w * fn2d(y, zero)) + np.sum(w * fn2d(zero, y)))

    def joint_exponent(self, u1, u2, t=0.0):
        """Exponent of (u1, u2); splits as psi(u1) + psi(u2) by axis support."""
        return levy_exponent(self.marginal, u1, t) + levy_exponent(self.marginal, u2, t)


def brownian_chars():
    """Standard Brownian driver: (0, 1, none; identity)."""
    return LocalCharacteristics.constant(0.0, 1.0)


def standard_poisson_chars(threshold=1.0):
    """Standard Poisson driver: unit-rate unit jumps with b matched to h.

    The drift equals h(1) so the same process (a standard Poisson counter)
    is described no matter which truncation threshold is used.
    """
    trunc = TruncationFunction(threshold)
    return LocalCharacteristics.constant(
        trunc(1.0), 0.0, JumpMeasure(1.0, ConstantSize(1.0)), truncation=trunc,
    )


def mixed_jump_chars():
    """Diffusion plus rate-2 uniform(-1, 1) jumps with drift 0.5."""
    return LocalCharacteristics.constant(0.5, 1.0, JumpMeasure(2.0, UniformSize(-1.0, 1.0)))
