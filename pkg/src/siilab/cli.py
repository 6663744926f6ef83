"""Command-line orchestration: load a scenario, fan the Monte Carlo work out,
write reports, delimited tables and figures, and map verdicts to exit codes
(0 pass, 1 statistical rejection, 2 usage or config error)."""

from __future__ import annotations

import argparse
import datetime
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import figures
from .chars import integrated_exponent
from .config import (ConfigError, LocatedError, PRESET_NAMES, load_preset,
                     parse_config, print_config)
from .dual import construct_v, recover_driver, splicing_mask
from .martingale import (kg_process, kg_value_matrix, martingale_test,
                         mf_process, mf_value_matrix, multiplicative_presets,
                         solution_presets, zero_covariation_check)
from .paths import joint_jump_mass, write_jump_table, write_path_table
from .report import ReportRow, TestReport, write_report
from .sde import solve_sde, z_process
from .simulate import RngStream, simulate_sii
from .stats import (default_u_grid, ecf_law_test_matrix, independence_test,
                    project_paths, projection_times)
from .sticky import StickyParams, naive_euler_sticky, simulate_sticky, verify_sticky_system

COMMANDS = ("simulate", "solve", "verify-sii", "verify-solution", "dual-check",
            "independence", "sticky-demo", "all")
N_TABLE_PATHS = 5
U_STREAM_OFFSET = 10_000_000  # keeps the fresh-copy streams away from driver streams


def _parallel_map(fn, items, threads):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class _Workspace:
    """Output layout shared by all commands."""

    def __init__(self, out_dir, render_figures):
        self.root = Path(out_dir)
        self.tables = self.root / "tables"
        self.figures = self.root / "figures"
        self.render_figures = render_figures
        self.root.mkdir(parents=True, exist_ok=True)
        self.tables.mkdir(exist_ok=True)
        if render_figures:
            self.figures.mkdir(exist_ok=True)
        self.reports = []

    def add_report(self, name, report):
        with open(self.root / f"report_{name}.txt", "w") as fh:
            write_report(report, fh)
        self.reports.append(report)

    def write_paths(self, label, paths):
        for i, p in enumerate(paths[:N_TABLE_PATHS]):
            with open(self.tables / f"{label}_{i}.csv", "w") as fh:
                write_path_table(p, fh)
            with open(self.tables / f"{label}_{i}_jumps.csv", "w") as fh:
                write_jump_table(p, fh)

    def figure(self, name):
        return self.figures / f"{name}.png" if self.render_figures else None

    def write_meta(self, argv):
        # the only timestamped artifact; reports stay byte-deterministic
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        (self.root / "run.meta").write_text(
            f"generated={stamp}\nargv={' '.join(argv)}\n")


def _simulate_matrix(chars, grid, seed, n_paths, threads, base_stream=0):
    paths = _parallel_map(
        lambda i: simulate_sii(chars, grid, RngStream(seed, base_stream + i)),
        range(n_paths), threads)
    return paths, np.stack([p.values for p in paths])


def _solve_paths(spec, drivers, threads):
    return _parallel_map(lambda d: solve_sde(spec, d), drivers, threads)


# -- commands -----------------------------------------------------------------

def _cmd_simulate(cfg, ws, threads):
    chars = cfg.build_characteristics()
    grid = cfg.build_grid()
    paths, values = _simulate_matrix(chars, grid, cfg.seed, cfg.n_paths, threads)
    ws.write_paths("driver", paths)
    terminal = values[:, -1]
    n_jumps = np.array([p.jump_times.size for p in paths])
    report = TestReport(
        test="simulate", scenario=cfg.name, passed=True, seeds=(cfg.seed,),
        metrics=(("n_paths", cfg.n_paths), ("horizon", grid.horizon),
                 ("terminal_mean", float(terminal.mean())),
                 ("terminal_var", float(terminal.var(ddof=1))),
                 ("mean_jumps_per_path", float(n_jumps.mean()))),
    )
    ws.add_report("simulate", report)
    if ws.render_figures:
        figures.plot_sample_paths(paths, ws.figure("driver_paths"),
                                  f"driver sample paths [{cfg.name}]")
    return [report]


def _cmd_solve(cfg, ws, threads):
    chars = cfg.build_characteristics()
    spec = cfg.build_sde_spec()
    grid = cfg.build_grid()
    drivers, _ = _simulate_matrix(chars, grid, cfg.seed, cfg.n_paths, threads)
    solutions = _solve_paths(spec, drivers, threads)
    ws.write_paths("solution", solutions)
    z_rows = []
    for i, x in enumerate(solutions[:3]):
        z = z_process(spec, chars, x)
        z_rows.append(ReportRow(f"Z final (path {i})", z.final(), np.inf,
                                bool(np.isfinite(z.final())), "must be finite"))
    terminal = np.array([x.values[-1] for x in solutions])
    report = TestReport(
        test="solve", scenario=cfg.name, passed=all(r.passed for r in z_rows),
        rows=tuple(z_rows), seeds=(cfg.seed,),
        metrics=(("n_paths", cfg.n_paths), ("x0", cfg.x0),
                 ("terminal_mean", float(terminal.mean())),
                 ("terminal_var", float(terminal.var(ddof=1)))),
    )
    ws.add_report("solve", report)
    if ws.render_figures:
        figures.plot_sample_paths(solutions, ws.figure("solution_paths"),
                                  f"solution sample paths [{cfg.name}]")
    return [report]


def _cmd_verify_sii(cfg, ws, threads):
    chars = cfg.build_characteristics()
    grid = cfg.build_grid()
    paths, values = _simulate_matrix(chars, grid, cfg.seed, cfg.n_paths, threads)
    times = [grid.horizon / 2.0, grid.horizon]
    u_grid = default_u_grid(cfg.u_max, cfg.n_u)
    idx = [grid.index_of(t) for t in times]
    ecf_report = ecf_law_test_matrix(values[:, idx], chars, times, u_grid,
                                     alpha=cfg.alpha, scenario=cfg.name,
                                     seeds=(cfg.seed,))
    ws.add_report("ecf_law", ecf_report)
    out = [ecf_report]

    presets = multiplicative_presets()
    for f in presets:
        mf = mf_value_matrix(f, values, grid, chars)
        rep = martingale_test(mf, grid=grid, alpha=cfg.alpha,
                              bonferroni_extra=len(presets), scenario=cfg.name,
                              label=f"M[{f.name}]", seeds=(cfg.seed,))
        ws.add_report(f"martingale_driver_{presets.index(f)}", rep)
        out.append(rep)

    if ws.render_figures:
        emp = [np.exp(1j * values[:, i][:, None] * u_grid[None, :]).mean(axis=0)
               for i in idx]
        model = [np.exp(integrated_exponent(chars, u_grid, t)) for t in times]
        figures.plot_ecf_comparison(u_grid, times, emp, model, ws.figure("ecf"),
                                    f"characteristic function [{cfg.name}]")
        figures.plot_statistic_rows(ecf_report, ws.figure("ecf_stats"))
    return out


def _cmd_verify_solution(cfg, ws, threads):
    chars = cfg.build_characteristics()
    spec = cfg.build_sde_spec()
    grid = cfg.build_grid()
    drivers, _ = _simulate_matrix(chars, grid, cfg.seed, cfg.n_paths, threads)
    solutions = _solve_paths(spec, drivers, threads)
    values = np.stack([x.values for x in solutions])
    presets = solution_presets()
    out = []
    for g in presets:
        kg = kg_value_matrix(g, values, grid, spec, chars)
        rep = martingale_test(kg, grid=grid, alpha=cfg.alpha,
                              bonferroni_extra=len(presets), scenario=cfg.name,
                              label=f"K[{g.name}]", seeds=(cfg.seed,))
        ws.add_report(f"martingale_solution_{presets.index(g)}", rep)
        out.append(rep)
    if ws.render_figures:
        figures.plot_statistic_rows(out[0], ws.figure("kg_stats"))
        figures.plot_sample_paths(solutions, ws.figure("solution_paths"),
                                  f"solution sample paths [{cfg.name}]")
    return out


def _cmd_dual_check(cfg, ws, threads):
    chars = cfg.build_characteristics()
    spec = cfg.build_sde_spec()
    grid = cfg.build_grid()
    n = cfg.n_paths

    def one(i):
        l_path = simulate_sii(chars, grid, RngStream(cfg.seed, i))
        u_path = simulate_sii(chars, grid, RngStream(cfg.seed, U_STREAM_OFFSET + i))
        x = solve_sde(spec, l_path)
        mask = splicing_mask(x, spec)
        v = construct_v(x, spec, u_path, l_path, mask=mask)
        l_hat = recover_driver(x, spec, v, mask=mask)
        err = float(np.max(np.abs(l_hat.values - l_path.values)))
        tol = 1e-9 * (1.0 + float(np.max(np.abs(l_path.values))))
        return l_path, u_path, x, v, err, tol

    results = _parallel_map(one, range(n), threads)
    errs = np.array([r[4] for r in results])
    tols = np.array([r[5] for r in results])
    jump_mass = np.array([joint_jump_mass(r[1], r[0]) for r in results])
    v_values = np.stack([r[3].values for r in results])
    times = [grid.horizon / 2.0, grid.horizon]
    idx = [grid.index_of(t) for t in times]
    u_grid = default_u_grid(cfg.u_max, cfg.n_u)
    v_law = ecf_law_test_matrix(v_values[:, idx], chars, times, u_grid,
                                alpha=cfg.alpha, scenario=cfg.name,
                                seeds=(cfg.seed,))
    ws.add_report("spliced_law", v_law)

    recovery_ok = bool(np.all(errs <= tols))
    disjoint_ok = bool(np.all(jump_mass == 0.0))
    rows = (
        ReportRow("recovery max error", float(errs.max()), float(tols.max()),
                  recovery_ok, "per-path tolerance 1e-9*(1+max|L|)"),
        ReportRow("joint jump mass", float(jump_mass.max()), 0.0, disjoint_ok,
                  "must be exactly 0"),
    )
    dual_report = TestReport(
        test="dual-construction", scenario=cfg.name,
        passed=recovery_ok and disjoint_ok, rows=rows, seeds=(cfg.seed,),
        metrics=(("n_paths", n),),
    )
    ws.add_report("dual", dual_report)

    n_cov = min(n, 2000)
    f = multiplicative_presets()[0]
    g = solution_presets()[1]
    mfs = [mf_process(f, results[i][3], chars) for i in range(n_cov)]
    kgs = [kg_process(g, results[i][2], spec, chars) for i in range(n_cov)]
    cov_report = zero_covariation_check(mfs, kgs, scenario=cfg.name,
                                        seeds=(cfg.seed,))
    ws.add_report("zero_covariation", cov_report)

    if ws.render_figures:
        figures.plot_recovery_errors(errs, ws.figure("recovery_errors"),
                                     f"driver recovery [{cfg.name}]")
        sample = results[0]
        figures.plot_sample_paths([sample[0], sample[1], sample[2], sample[3]],
                                  ws.figure("splice_example"),
                                  "driver / fresh copy / solution / spliced")
    return [v_law, dual_report, cov_report]


def _cmd_independence(cfg, ws, threads):
    chars = cfg.build_characteristics()
    spec = cfg.build_sde_spec()
    grid = cfg.build_grid()
    n = cfg.n_independence

    def one(i):
        l_path = simulate_sii(chars, grid, RngStream(cfg.seed, i))
        u_path = simulate_sii(chars, grid, RngStream(cfg.seed, U_STREAM_OFFSET + i))
        x = solve_sde(spec, l_path)
        v = construct_v(x, spec, u_path, l_path)
        return x, v

    pairs = _parallel_map(one, range(n), threads)
    times = projection_times(grid.horizon)
    xs = project_paths([p[0] for p in pairs], times)
    vs = project_paths([p[1] for p in pairs], times)
    null_stats = []
    report = independence_test(xs, vs, cfg.n_perm, alpha=cfg.alpha,
                               seed=cfg.seed, scenario=cfg.name,
                               seeds=(cfg.seed,), null_out=null_stats)
    ws.add_report("independence", report)
    if ws.render_figures:
        figures.plot_permutation_null(null_stats, report.max_stat,
                                      ws.figure("independence_null"),
                                      f"distance covariance null [{cfg.name}]")
    return [report]


def _cmd_sticky_demo(cfg, ws, threads):
    params = cfg.build_sticky_params()
    if params is None:
        raise ConfigError([LocatedError(0, 0, "sticky",
                                        "sticky block required for sticky-demo")])
    grid = cfg.build_grid()
    report = verify_sticky_system(params, cfg.n_paths, grid, seed=cfg.seed,
                                  alpha=cfg.alpha, scenario=cfg.name)
    control = verify_sticky_system(params, cfg.n_paths, grid, seed=cfg.seed,
                                   alpha=cfg.alpha, scenario=cfg.name,
                                   simulator="naive-euler", run_martingale=False)
    control_row = ReportRow("negative control rejected",
                            control.max_stat, control.threshold,
                            not control.passed,
                            "naive Euler must fail the occupation identity")
    combined = TestReport(
        test=report.test, scenario=report.scenario,
        passed=report.passed and not control.passed, alpha=report.alpha,
        max_stat=report.max_stat, threshold=report.threshold,
        rows=report.rows + (control_row,), seeds=report.seeds,
        notes=report.notes, metrics=report.metrics,
    )
    ws.add_report("sticky", combined)
    sample = [simulate_sticky(params, grid, RngStream(cfg.seed, i))
              for i in range(N_TABLE_PATHS)]
    ws.write_paths("sticky", sample)
    if ws.render_figures:
        metrics = dict(combined.metrics)
        figures.plot_sticky_summary(sample, metrics["occupation_mean"],
                                    metrics["local_time_over_2mu"],
                                    ws.figure("sticky"), f"sticky [{cfg.name}]")
    return [combined]


_DISPATCH = {
    "simulate": _cmd_simulate,
    "solve": _cmd_solve,
    "verify-sii": _cmd_verify_sii,
    "verify-solution": _cmd_verify_solution,
    "dual-check": _cmd_dual_check,
    "independence": _cmd_independence,
    "sticky-demo": _cmd_sticky_demo,
}


def run_scenario(cfg, command, out_dir, *, threads=1, render_figures=True):
    """Run one command against a parsed scenario; returns the exit code."""
    ws = _Workspace(out_dir, render_figures)
    (ws.root / "scenario.canonical").write_text(print_config(cfg))
    if command == "all":
        names = ["verify-sii", "verify-solution", "dual-check", "independence"]
        if cfg.sticky_mu is not None:
            names.append("sticky-demo")
    else:
        names = [command]
    reports = []
    for name in names:
        reports.extend(_DISPATCH[name](cfg, ws, threads))
    ws.write_meta([command])
    return 0 if all(r.passed for r in reports) else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="siilab",
        description="Simulation and verification lab for SDEs driven by "
                    "independent-increment semimartingales.")
    parser.add_argument("command", choices=COMMANDS)
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", metavar="PATH", help="scenario file")
    source.add_argument("--preset", choices=PRESET_NAMES, help="shipped scenario")
    parser.add_argument("--out", metavar="DIR", default="siilab-out",
                        help="output directory (default: %(default)s)")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the scenario seed")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for per-path work")
    parser.add_argument("--alpha", type=float, default=None,
                        help="override the scenario test level")
    parser.add_argument("--no-figures", action="store_true",
                        help="skip figure rendering")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        text = load_preset(args.preset) if args.preset else Path(args.config).read_text()
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 2
    cfg = cfg.with_overrides(seed=args.seed, alpha=args.alpha)
    try:
        code = run_scenario(cfg, args.command, args.out, threads=max(1, args.threads),
                            render_figures=not args.no_figures)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{args.command}: {'PASS' if code == 0 else 'FAIL'} "
          f"(reports in {args.out})")
    return code


if __name__ == "__main__":
    sys.exit(main())
