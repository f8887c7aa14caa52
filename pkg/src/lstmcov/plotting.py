"""Render report figures to image files.

Kept separate from the reporting module on purpose: reports stay plain
delimited text, and figure rendering is an optional extra step layered on top
of a CampaignReport (fresh from a run or parsed back from a record log).
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .reporting import CampaignReport

__all__ = ["render_figures"]

COVERAGE_FIG = "coverage_vs_testcases.png"
CURVE_FIG = "adversarial_vs_radius.png"
TIMES_FIG = "coverage_times.png"


def _plot_coverage(report: CampaignReport, path: str) -> None:
    xs = [r.test_cases_so_far for r in report.records]
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for label, pick in (
        ("cell", lambda r: r.cell_rate),
        ("gate", lambda r: r.gate_rate),
        ("seq+", lambda r: r.seq_pos_rate),
        ("seq-", lambda r: r.seq_neg_rate),
    ):
        ax.plot(xs, [pick(r) for r in report.records], label=label)
    ax.set_xlabel("test cases")
    ax.set_ylabel("coverage rate")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(loc="best")
    ax.set_title("Coverage vs. test cases")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def _plot_curve(report: CampaignReport, path: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(report.curve_radii, report.curve_counts, marker="o", markersize=3)
    ax.set_xlabel("oracle radius")
    ax.set_ylabel("adversarial examples")
    title = "Adversarial examples vs. radius"
    if report.curve_auc is not None:
        title += f" (area {report.curve_auc:.4g})"
    ax.set_title(title)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)


def _plot_times(report: CampaignReport, path: str) -> None:
    tables = report.coverage_tables
    fig, axes = plt.subplots(2, 1, figsize=(8, 6), sharex=False)
    for ax, metric in zip(axes, ("cell", "gate")):
        table = tables.get(metric, {})
        labels = list(table)
        counts = [table[k] for k in labels]
        ax.bar(range(len(labels)), counts)
        ax.set_ylabel("hit count")
        ax.set_title(f"{metric} condition coverage times")
        step = max(1, len(labels) // 14)
        ax.set_xticks(range(0, len(labels), step))
        ax.set_xticklabels(labels[::step], rotation=45, ha="right", fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_figures(report: CampaignReport, out_dir) -> list[str]:
    """Write PNG figures for a report into out_dir; returns the paths written.

    Figures whose data is absent (empty campaign) are skipped.
    """
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if report.records:
        p = os.path.join(out_dir, COVERAGE_FIG)
        _plot_coverage(report, p)
        written.append(p)
    if report.curve_radii:
        p = os.path.join(out_dir, CURVE_FIG)
        _plot_curve(report, p)
        written.append(p)
    if report.coverage_tables and (report.coverage_tables.get("cell")
                                   or report.coverage_tables.get("gate")):
        p = os.path.join(out_dir, TIMES_FIG)
        _plot_times(report, p)
        written.append(p)
    return written
