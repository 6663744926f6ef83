"""Matplotlib renderers for the report path.

Every CLI command that writes a report can also drop a PNG next to the
delimited tables; rendering is best-effort presentation and never affects
verdicts or exit codes.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_SAVE_OPTS = {"dpi": 110, "bbox_inches": "tight", "metadata": {"Software": None}}


def _finish(fig, outfile):
    fig.savefig(outfile, **_SAVE_OPTS)
    plt.close(fig)


def plot_sample_paths(paths, outfile, title="sample paths", max_paths=8):
    fig, ax = plt.subplots(figsize=(7, 4))
    for p in paths[:max_paths]:
        ax.step(p.grid.times, p.values, where="post", lw=0.9)
        if p.jump_times.size:
            ax.plot(p.jump_times, [p.value_at(t) for t in p.jump_times],
                    "k.", ms=3, alpha=0.5)
    ax.set_xlabel("t")
    ax.set_ylabel("value")
    ax.set_title(title)
    _finish(fig, outfile)


def plot_ecf_comparison(u_grid, times, empirical, model, outfile, title="empirical vs model CF"):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for i, t in enumerate(times):
        axes[0].plot(u_grid, np.abs(empirical[i]), "o", ms=3, label=f"empirical t={t:g}")
        axes[0].plot(u_grid, np.abs(model[i]), "-", lw=1, label=f"model t={t:g}")
        axes[1].plot(u_grid, np.real(empirical[i] - model[i]), "-", lw=1,
                     label=f"Re gap t={t:g}")
        axes[1].plot(u_grid, np.imag(empirical[i] - model[i]), "--", lw=1,
                     label=f"Im gap t={t:g}")
    axes[0].set_xlabel("u")
    axes[0].set_ylabel("|CF|")
    axes[0].legend(fontsize=7)
    axes[1].set_xlabel("u")
    axes[1].set_ylabel("gap")
    axes[1].axhline(0.0, color="k", lw=0.5)
    axes[1].legend(fontsize=7)
    fig.suptitle(title)
    _finish(fig, outfile)


def plot_statistic_rows(report, outfile):
    rows = report.rows
    fig, ax = plt.subplots(figsize=(7, max(2.5, 0.3 * len(rows))))
    names = [r.name for r in rows]
    stats = [min(r.statistic, 1e6) for r in rows]
    colors = ["tab:blue" if r.passed else "tab:red" for r in rows]
    y = np.arange(len(rows))
    ax.barh(y, stats, color=colors)
    if report.threshold is not None:
        ax.axvline(report.threshold, color="k", ls="--", lw=1, label="threshold")
        ax.legend(fontsize=7)
    ax.set_yticks(y)
    ax.set_yticklabels(names, fontsize=7)
    ax.invert_yaxis()
    ax.set_xlabel("statistic")
    ax.set_title(f"{report.test} [{report.scenario}]")
    _finish(fig, outfile)


def plot_permutation_null(perm_stats, observed, outfile, title="permutation null"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(perm_stats, bins=40, color="tab:gray", alpha=0.8, label="permuted")
    ax.axvline(observed, color="tab:red", lw=2, label="observed")
    ax.set_xlabel("squared distance covariance")
    ax.set_ylabel("count")
    ax.set_title(title)
    ax.legend(fontsize=8)
    _finish(fig, outfile)


def plot_recovery_errors(errors, outfile, title="driver recovery error"):
    errors = np.asarray(errors, dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    floored = np.maximum(errors, 1e-18)
    ax.hist(np.log10(floored), bins=40, color="tab:blue", alpha=0.85)
    ax.set_xlabel("log10 max grid error")
    ax.set_ylabel("count")
    ax.set_title(title)
    _finish(fig, outfile)


def plot_sticky_summary(paths, occupation_mean, local_over_2mu, outfile,
                        title="sticky diffusion"):
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    for p in paths[:6]:
        axes[0].plot(p.grid.times, p.values, lw=0.8)
    axes[0].axhline(0.0, color="k", lw=0.5)
    axes[0].set_xlabel("t")
    axes[0].set_ylabel("X")
    axes[0].set_title("paths")
    axes[1].bar([0, 1], [occupation_mean, local_over_2mu],
                color=["tab:blue", "tab:orange"])
    axes[1].set_xticks([0, 1])
    axes[1].set_xticklabels(["mean time at 0", "mean local time / 2mu"], fontsize=8)
    axes[1].set_title("occupation identity")
    fig.suptitle(title)
    _finish(fig, outfile)
