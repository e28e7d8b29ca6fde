"""Figure rendering for the experiment reports.

Each report subcommand saves a PNG next to its delimited output.  All
figures are produced headlessly with the Agg backend and no timestamps, so
repeated runs with the same inputs write identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from stepreg.model import DataSet, RegressionFunction

__all__ = [
    "save_dataset_plot",
    "save_fit_plot",
    "save_zone_scan_plot",
    "save_model_posterior_plot",
    "save_exact_z_plot",
    "save_psi_plot",
    "save_end_zone_plot",
    "save_badset_plot",
    "save_urn_terms_plot",
    "save_mixing_plot",
    "save_function_plot",
]

_GRID = np.linspace(0.0, 1.0, 513)


def _new_axes(xlabel: str, ylabel: str):
    fig, ax = plt.subplots(figsize=(6.0, 3.6), dpi=150)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    return fig, ax


def _finish(fig, ax, path, legend: bool = True):
    if legend and ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _rug(ax, data: DataSet):
    ones = data.x[data.y == 1]
    zeros = data.x[data.y == 0]
    ax.plot(ones, np.full(ones.size, 1.02), "|", color="0.4", ms=4, alpha=0.5)
    ax.plot(zeros, np.full(zeros.size, -0.02), "|", color="0.4", ms=4, alpha=0.5)


def save_dataset_plot(path, data: DataSet, truth: RegressionFunction | None = None) -> None:
    fig, ax = _new_axes("x", "y")
    ax.plot(data.x, data.y, ".", ms=3, alpha=0.4, label="data")
    if truth is not None:
        ax.plot(_GRID, truth(_GRID), "-", lw=1.5, label="truth")
    _finish(fig, ax, path)


def save_fit_plot(path, estimate: RegressionFunction, truth: RegressionFunction | None = None,
                  data: DataSet | None = None) -> None:
    fig, ax = _new_axes("x", "regression function")
    if data is not None:
        _rug(ax, data)
    if truth is not None:
        ax.plot(_GRID, truth(_GRID), "-", color="0.6", lw=2.5, label="truth")
    ax.plot(_GRID, estimate(_GRID), "-", color="C0", lw=1.2, label="posterior mean")
    ax.set_ylim(-0.08, 1.08)
    _finish(fig, ax, path)


def save_zone_scan_plot(path, result) -> None:
    fig, ax = _new_axes("m", "(1/n) log Z estimate")
    ms = [row.m for row in result.rows]
    est = [row.estimate for row in result.rows]
    err = [3 * row.std_error for row in result.rows]
    ax.errorbar(ms, est, yerr=err, fmt="o-", ms=3, lw=1, label="marginal rate")
    if result.rows:
        ax.axhline(result.rows[0].reference, color="0.5", ls="--", lw=1, label="-H(f)")
    if result.per_split_rows:
        ax.plot(
            [row.m for row in result.per_split_rows],
            [row.estimate for row in result.per_split_rows],
            ".", color="C2", ms=2, alpha=0.5, label="per split vector",
        )
    _finish(fig, ax, path)


def save_model_posterior_plot(path, posterior) -> None:
    fig, ax = _new_axes("m", "posterior probability")
    ax.bar(np.arange(posterior.probs.size), posterior.probs, color="C0")
    _finish(fig, ax, path, legend=False)


def save_exact_z_plot(path, ms, log_zs) -> None:
    fig, ax = _new_axes("m", "log Z_m")
    ax.plot(ms, log_zs, "o-", ms=3, lw=1)
    _finish(fig, ax, path, legend=False)


def save_psi_plot(path, rows) -> None:
    fig, ax = _new_axes("alpha", "rate estimate")
    alphas = [row.alpha for row in rows]
    ax.errorbar(alphas, [row.estimate for row in rows], yerr=[3 * row.std_error for row in rows],
                fmt="o-", ms=3, lw=1, label="psi estimate")
    ax.axhline(-np.log(2.0), color="0.5", ls=":", lw=1, label="-log 2")
    _finish(fig, ax, path)


def save_end_zone_plot(path, report) -> None:
    fig, ax = _new_axes("alpha", "rate estimate")
    alphas = [row.alpha for row in report.rows]
    ax.errorbar(alphas, [row.estimate for row in report.rows],
                yerr=[3 * row.std_error for row in report.rows], fmt="o-", ms=3, lw=1, label="psi estimate")
    ax.axhline(-report.entropy, color="C3", ls="--", lw=1, label="-H(f)")
    ax.axhline(-np.log(2.0), color="0.5", ls=":", lw=1, label="-log 2")
    _finish(fig, ax, path)


def save_badset_plot(path, report, data: DataSet) -> None:
    fig, ax = _new_axes("x", "")
    for a, b in report.witnesses:
        ax.axvspan(a, b, color="C3", alpha=0.3)
    ax.plot(data.x, 0.5 + 0.02 * (2.0 * data.y - 1.0), "|", color="0.3", ms=8, alpha=0.6)
    ax.set_xlim(0, 1)
    ax.set_yticks([])
    ax.set_title(f"flagged measure = {report.measure:.4f}", fontsize=9)
    _finish(fig, ax, path, legend=False)


def save_urn_terms_plot(path, rows) -> None:
    fig, ax = _new_axes("k", "mean log ratio")
    ks = [row.k for row in rows]
    ax.errorbar(ks, [row.mean for row in rows], yerr=[3 * row.std_error for row in rows],
                fmt="o-", ms=3, lw=1)
    ax.axhline(0.0, color="0.5", ls="--", lw=1)
    _finish(fig, ax, path, legend=False)


def save_mixing_plot(path, rows) -> None:
    fig, ax = _new_axes("prefix", "total variation")
    labels = ["".join(map(str, row.prefix)) or "(empty)" for row in rows]
    ax.bar(np.arange(len(rows)), [row.tv for row in rows], color="C0", label="tv")
    if rows:
        ax.axhline(rows[0].no_recharge_bound, color="C3", ls="--", lw=1, label="(1-r)^m")
    ax.set_xticks(np.arange(len(rows)))
    ax.set_xticklabels(labels, fontsize=7)
    _finish(fig, ax, path)


def save_function_plot(path, f: RegressionFunction, label: str = "f") -> None:
    fig, ax = _new_axes("x", "value")
    ax.plot(_GRID, f(_GRID), "-", lw=1.5, label=label)
    ax.set_ylim(-0.05, 1.05)
    _finish(fig, ax, path)
