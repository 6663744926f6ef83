"""Scenario configuration: a strict JSON key-value tree with one canonical
serialization.  Unknown keys are rejected so a typo in a coefficient name can
never silently weaken a verification run."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from importlib import resources

from .chars import (ConstantSize, GaussianSize, JumpMeasure, LocalCharacteristics,
                    PiecewiseConstant, TimeScale, TruncationFunction, UniformSize)
from .expr import ExpressionSyntaxError, parse_expression, to_source
from .paths import TimeGrid
from .sde import SdeSpec
from .sticky import StickyParams

PRESET_NAMES = ("brownian", "poisson", "mixed-jump", "degenerate-sigma", "sticky")


@dataclass(frozen=True)
class LocatedError:
    line: int
    column: int
    path: str
    message: str

    def __str__(self):
        where = f"line {self.line}, column {self.column}" if self.line else "config"
        at = f" at {self.path}" if self.path else ""
        return f"{where}{at}: {self.message}"


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in self.errors))


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    b: object  # number or ((t, v), ...) table
    c: object
    jump_rate: float
    jump_size: tuple | None  # ("constant", v) | ("uniform", a, b) | ("gaussian", m, s)
    clock_table: tuple | None  # None means the identity clock
    truncation: float
    x0: float
    mu_source: str
    sigma_source: str
    horizon: float
    n_steps: int
    n_paths: int
    seed: int
    alpha: float
    n_perm: int
    u_max: float
    n_u: int
    n_independence: int
    sticky_mu: float | None
    sticky_x0: float | None

    def with_overrides(self, seed=None, alpha=None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if alpha is not None:
            cfg = replace(cfg, alpha=float(alpha))
        return cfg

    # -- builders ----------------------------------------------------------

    def build_characteristics(self):
        def as_table(value):
            if isinstance(value, tuple):
                return PiecewiseConstant(tuple(t for t, _ in value),
                                         tuple(v for _, v in value))
            return PiecewiseConstant.constant(float(value))

        if self.jump_rate > 0:
            kind = self.jump_size[0]
            if kind == "constant":
                sizes = ConstantSize(self.jump_size[1])
            elif kind == "uniform":
                sizes = UniformSize(self.jump_size[1], self.jump_size[2])
            else:
                sizes = GaussianSize(self.jump_size[1], self.jump_size[2])
            jumps = JumpMeasure(self.jump_rate, sizes)
        else:
            jumps = JumpMeasure.empty()
        clock = TimeScale.identity() if self.clock_table is None \
            else TimeScale.from_table(self.clock_table)
        return LocalCharacteristics(
            drift=as_table(self.b), diffusion=as_table(self.c),
            jumps=PiecewiseConstant.constant(jumps), clock=clock,
            truncation=TruncationFunction(self.truncation))

    def build_sde_spec(self):
        return SdeSpec.from_expressions(self.x0, self.mu_source, self.sigma_source)

    def build_grid(self):
        return TimeGrid.uniform(self.horizon, self.n_steps)

    def build_sticky_params(self):
        if self.sticky_mu is None:
            return None
        return StickyParams(self.sticky_mu, self.sticky_x0)

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        chars = {
            "b": _table_out(self.b),
            "c": _table_out(self.c),
            "truncation": self.truncation,
        }
        if self.jump_rate > 0:
            kind = self.jump_size[0]
            size = {"kind": kind}
            if kind == "constant":
                size["value"] = self.jump_size[1]
            elif kind == "uniform":
                size["a"], size["b"] = self.jump_size[1], self.jump_size[2]
            else:
                size["mean"], size["std"] = self.jump_size[1], self.jump_size[2]
            chars["jumps"] = {"rate": self.jump_rate, "size": size}
        else:
            chars["jumps"] = None
        chars["A"] = ({"kind": "identity"} if self.clock_table is None else
                      {"kind": "table", "points": [list(p) for p in self.clock_table]})
        out = {
            "name": self.name,
            "characteristics": chars,
            "sde": {"x0": self.x0, "mu": self.mu_source, "sigma": self.sigma_source},
            "grid": {"horizon": self.horizon, "n_steps": self.n_steps},
            "mc": {"n_paths": self.n_paths, "seed": self.seed, "alpha": self.alpha,
                   "n_perm": self.n_perm, "u_max": self.u_max, "n_u": self.n_u,
                   "n_independence": self.n_independence},
        }
        if self.sticky_mu is not None:
            out["sticky"] = {"mu": self.sticky_mu, "x0": self.sticky_x0}
        return out


def _table_out(value):
    return [list(p) for p in value] if isinstance(value, tuple) else value


def print_config(cfg):
    """Canonical serialization; parse(print(cfg)) == cfg."""
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"


# -- validation helpers --------------------------------------------------------


class _Check:
    def __init__(self, text):
        self.text = text
        self.errors = []

    def fail(self, path, message):
        line, column = _locate_key(self.text, path)
        self.errors.append(LocatedError(line, column, path, message))

    def require_keys(self, obj, path, required, optional=()):
        missing = [k for k in required if k not in obj]
        for k in missing:
            self.fail(path, f"missing key {k!r}")
        unknown = [k for k in obj if k not in required and k not in optional]
        for k in unknown:
            self.fail(f"{path}.{k}" if path else k, "unknown key")
        return not missing

    def number(self, obj, path, key, lo=None, hi=None, integer=False):
        if key not in obj:
            return None
        v = obj[key]
        where = f"{path}.{key}" if path else key
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(where, "must be a number")
            return None
        if integer and int(v) != v:
            self.fail(where, "must be an integer")
            return None
        if lo is not None and v < lo:
            self.fail(where, f"must be >= {lo}")
            return None
        if hi is not None and v > hi:
            self.fail(where, f"must be <= {hi}")
            return None
        return int(v) if integer else float(v)


def _locate_key(text, path):
    """Best-effort (line, column) of the deepest key named in ``path``."""
    leaf = path.split(".")[-1] if path else ""
    if leaf:
        m = re.search(rf'"{re.escape(leaf)}"\s*:', text)
        if m:
            line = text.count("\n", 0, m.start()) + 1
            column = m.start() - (text.rfind("\n", 0, m.start()) + 1) + 1
            return line, column
    return 0, 0


def _parse_drift_table(check, obj, path, key, nonnegative=False):
    if key not in obj:
        return None
    v = obj[key]
    where = f"{path}.{key}"
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        if nonnegative and v < 0:
            check.fail(where, "must be >= 0")
            return None
        return float(v)
    if isinstance(v, list):
        try:
            pairs = tuple((float(t), float(val)) for t, val in v)
        except (TypeError, ValueError):
            check.fail(where, "table entries must be [time, value] pairs")
            return None
        if not pairs or pairs[0][0] != 0.0 or any(
                b <= a for (a, _), (b, _) in zip(pairs, pairs[1:])):
            check.fail(where, "table times must increase from 0")
            return None
        if nonnegative and any(val < 0 for _, val in pairs):
            check.fail(where, "must be >= 0")
            return None
        return pairs
    check.fail(where, "must be a number or a [[time, value], ...] table")
    return None


def parse_config(text):
    """Parse and validate a scenario; raises ConfigError with located errors."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([LocatedError(exc.lineno, exc.colno, "", exc.msg)]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([LocatedError(0, 0, "", "config must be an object")])
    check = _Check(text)
    check.require_keys(raw, "", ("name", "characteristics", "sde", "grid", "mc"),
                       optional=("sticky",))

    name = raw.get("name")
    if not isinstance(name, str) or not name:
        check.fail("name", "must be a nonempty string")
        name = "unnamed"

    # characteristics ------------------------------------------------------
    b = c = 0.0
    jump_rate, jump_size, clock_table, truncation = 0.0, None, None, 1.0
    chars = raw.get("characteristics")
    if isinstance(chars, dict):
        check.require_keys(chars, "characteristics", ("b", "c", "jumps", "A"),
                           optional=("truncation",))
        b = _parse_drift_table(check, chars, "characteristics", "b")
        c = _parse_drift_table(check, chars, "characteristics", "c", nonnegative=True)
        truncation = check.number(chars, "characteristics", "truncation", lo=1e-12)
        if truncation is None:
            truncation = 1.0
        jumps = chars.get("jumps")
        if jumps is not None:
            if isinstance(jumps, dict):
                check.require_keys(jumps, "characteristics.jumps", ("rate", "size"))
                jump_rate = check.number(jumps, "characteristics.jumps", "rate", lo=0.0)
                jump_rate = 0.0 if jump_rate is None else jump_rate
                size = jumps.get("size")
                if isinstance(size, dict):
                    kind = size.get("kind")
                    if kind == "constant":
                        check.require_keys(size, "characteristics.jumps.size",
                                           ("kind", "value"))
                        v = check.number(size, "characteristics.jumps.size", "value")
                        if v == 0.0:
                            check.fail("characteristics.jumps.size.value",
                                       "jump size must be nonzero")
                        jump_size = ("constant", v)
                    elif kind == "uniform":
                        check.require_keys(size, "characteristics.jumps.size",
                                           ("kind", "a", "b"))
                        a = check.number(size, "characteristics.jumps.size", "a")
                        bb = check.number(size, "characteristics.jumps.size", "b")
                        if a is not None and bb is not None and not a < bb:
                            check.fail("characteristics.jumps.size", "needs a < b")
                        jump_size = ("uniform", a, bb)
                    elif kind == "gaussian":
                        check.require_keys(size, "characteristics.jumps.size",
                                           ("kind", "mean", "std"))
                        m = check.number(size, "characteristics.jumps.size", "mean")
                        s = check.number(size, "characteristics.jumps.size", "std",
                                         lo=1e-12)
                        jump_size = ("gaussian", m, s)
                    else:
                        check.fail("characteristics.jumps.size.kind",
                                   "must be constant, uniform or gaussian")
                elif jump_rate > 0:
                    check.fail("characteristics.jumps.size", "must be an object")
                if jump_rate == 0.0:
                    jump_size = None
            else:
                check.fail("characteristics.jumps", "must be an object or null")
        a_spec = chars.get("A")
        if isinstance(a_spec, dict):
            kind = a_spec.get("kind")
            if kind == "identity":
                check.require_keys(a_spec, "characteristics.A", ("kind",))
            elif kind == "table":
                check.require_keys(a_spec, "characteristics.A", ("kind", "points"))
                points = a_spec.get("points")
                try:
                    clock_table = tuple((float(t), float(v)) for t, v in points)
                except (TypeError, ValueError):
                    check.fail("characteristics.A.points",
                               "must be [[time, value], ...]")
                    clock_table = None
                if clock_table is not None:
                    ts = [t for t, _ in clock_table]
                    vs = [v for _, v in clock_table]
                    if len(ts) < 2 or ts[0] != 0.0 or vs[0] != 0.0 or \
                            any(y <= x for x, y in zip(ts, ts[1:])) or \
                            any(y < x for x, y in zip(vs, vs[1:])):
                        check.fail("characteristics.A.points", "A not nondecreasing")
                        clock_table = None
            else:
                check.fail("characteristics.A.kind", "must be identity or table")
        elif "A" in chars:
            check.fail("characteristics.A", "must be an object")
    elif chars is not None:
        check.fail("characteristics", "must be an object")

    # sde --------------------------------------------------------------------
    x0, mu_source, sigma_source = 0.0, "0.0", "1.0"
    sde = raw.get("sde")
    if isinstance(sde, dict):
        check.require_keys(sde, "sde", ("x0", "mu", "sigma"))
        x0v = check.number(sde, "sde", "x0")
        x0 = 0.0 if x0v is None else x0v
        for key in ("mu", "sigma"):
            src = sde.get(key)
            if not isinstance(src, str):
                if key in sde:
                    check.fail(f"sde.{key}", "must be an expression string")
                continue
            try:
                canonical = to_source(parse_expression(src))
            except ExpressionSyntaxError as exc:
                check.fail(f"sde.{key}", f"syntax error at column {exc.column}: "
                           f"{exc.message}")
                continue
            if key == "mu":
                mu_source = canonical
            else:
                sigma_source = canonical
    elif sde is not None:
        check.fail("sde", "must be an object")

    # grid / mc ---------------------------------------------------------------
    horizon, n_steps = 1.0, 200
    grid = raw.get("grid")
    if isinstance(grid, dict):
        check.require_keys(grid, "grid", ("horizon", "n_steps"))
        h = check.number(grid, "grid", "horizon", lo=1e-9)
        horizon = 1.0 if h is None else h
        n = check.number(grid, "grid", "n_steps", lo=1, integer=True)
        n_steps = 200 if n is None else n
    elif grid is not None:
        check.fail("grid", "must be an object")

    n_paths, seed, alpha, n_perm = 1000, 0, 0.01, 500
    u_max, n_u, n_independence = 5.0, 21, 1500
    mc = raw.get("mc")
    if isinstance(mc, dict):
        check.require_keys(mc, "mc", ("n_paths", "seed", "alpha", "n_perm"),
                           optional=("u_max", "n_u", "n_independence"))
        v = check.number(mc, "mc", "n_paths", lo=1, integer=True)
        n_paths = 1000 if v is None else v
        v = check.number(mc, "mc", "seed", integer=True)
        seed = 0 if v is None else v
        v = check.number(mc, "mc", "alpha", lo=1e-9, hi=0.5)
        alpha = 0.01 if v is None else v
        v = check.number(mc, "mc", "n_perm", lo=10, integer=True)
        n_perm = 500 if v is None else v
        v = check.number(mc, "mc", "u_max", lo=1e-9)
        u_max = 5.0 if v is None else v
        v = check.number(mc, "mc", "n_u", lo=3, integer=True)
        n_u = 21 if v is None else v
        v = check.number(mc, "mc", "n_independence", lo=50, integer=True)
        n_independence = 1500 if v is None else v
    elif mc is not None:
        check.fail("mc", "must be an object")

    sticky_mu = sticky_x0 = None
    sticky = raw.get("sticky")
    if isinstance(sticky, dict):
        check.require_keys(sticky, "sticky", ("mu", "x0"))
        sticky_mu = check.number(sticky, "sticky", "mu", lo=1e-12)
        sticky_x0 = check.number(sticky, "sticky", "x0", lo=0.0)
    elif sticky is not None:
        check.fail("sticky", "must be an object")

    if check.errors:
        raise ConfigError(check.errors)
    return ScenarioConfig(
        name=name, b=b, c=c, jump_rate=jump_rate, jump_size=jump_size,
        clock_table=clock_table, truncation=truncation, x0=x0,
        mu_source=mu_source, sigma_source=sigma_source, horizon=horizon,
        n_steps=n_steps, n_paths=n_paths, seed=seed, alpha=alpha, n_perm=n_perm,
        u_max=u_max, n_u=n_u, n_independence=n_independence,
        sticky_mu=sticky_mu, sticky_x0=sticky_x0,
    )


def load_preset(name):
    """Text of a shipped scenario preset."""
    if name not in PRESET_NAMES:
        raise KeyError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    return resources.files("siilab").joinpath(f"presets/{name}.scenario").read_text()
