"""Figure rendering for experiment reports (PNG next to the CSV)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .experiments import ExperimentReport  # noqa: E402


def _empty(ax, message: str) -> None:
    ax.text(0.5, 0.5, message, ha="center", va="center")
    ax.set_axis_off()


def _render_phi(report: ExperimentReport, ax) -> None:
    entries = [row[2] for row in report.rows if row[2] is not None]
    if not entries:
        _empty(ax, "no entered trials")
        return
    ax.hist(entries, bins=30, color="steelblue", edgecolor="black")
    ax.set_xlabel("entry time")
    ax.set_ylabel("trials")
    agg = report.aggregates
    ax.set_title(f"entry fraction {agg.get('entry_fraction', 0):.3f}, "
                 f"premature {agg.get('premature_fraction', 0):.3f}")


def _render_metrics(report: ExperimentReport, ax) -> None:
    labels = [str(row[0]) for row in report.rows]
    values = [float(row[1]) if row[1] is not None else 0.0
              for row in report.rows]
    ax.barh(labels, values, color="slategray")
    ax.set_xlabel("value")
    ax.invert_yaxis()


def _render_redundancy(report: ExperimentReport, ax) -> None:
    ns = [row[0] for row in report.rows]
    vals = [row[1] for row in report.rows]
    cis = [row[2] for row in report.rows]
    ax.errorbar(ns, vals, yerr=cis, marker="o", color="firebrick",
                capsize=3)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("bits per symbol")
    ax.set_title("per-symbol redundancy")


def _render_insure(report: ExperimentReport, ax) -> None:
    entries = [row[1] for row in report.rows if row[1] is not None]
    if not entries:
        _empty(ax, "no entered trials")
        return
    ax.hist(entries, bins=30, color="seagreen", edgecolor="black")
    ax.set_xlabel("entry time")
    ax.set_ylabel("trials")
    agg = report.aggregates
    ax.set_title(f"ruin fraction {agg.get('ruin_fraction', 0):.3f}, "
                 f"violations {agg.get('violation_total', 0)}")


def _render_bounds(report: ExperimentReport, ax) -> None:
    names, margins, colors = [], [], []
    for row in report.rows:
        parts = row.split(",")
        names.append(parts[0])
        margins.append(float(parts[2]) - float(parts[3]))
        colors.append("firebrick" if parts[5] == "1" else "steelblue")
    ax.barh(names, margins, color=colors)
    ax.set_xlabel("bound - observed")
    ax.invert_yaxis()


def _render_demo(report: ExperimentReport, ax) -> None:
    labels = [f"{row[0]}:{row[1]}" for row in report.rows]
    values = [float(row[2]) for row in report.rows]
    ax.barh(labels, values, color="slategray")
    ax.set_xscale("symlog")
    ax.set_xlabel("value")
    ax.invert_yaxis()


_RENDERERS = {
    "phi-run": _render_phi,
    "premature": _render_metrics,
    "redundancy-curve": _render_redundancy,
    "insure": _render_insure,
    "bounds-suite": _render_bounds,
    "demo": _render_demo,
}


def render(report: ExperimentReport, path: str | Path) -> Path:
    """Render the report's figure to ``path`` and return it."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 5), constrained_layout=True)
    if not report.rows:
        _empty(ax, "empty report")
    else:
        _RENDERERS[report.config.kind](report, ax)
    fig.suptitle(f"{report.config.kind} (seed {report.config.seed})")
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
