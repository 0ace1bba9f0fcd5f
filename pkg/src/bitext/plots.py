"""Figure rendering for reports. Every figure lands next to its report
file, named <report stem>.<figure>.png."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .report import Histogram, RunReport


def render_histogram(hist: Histogram, title: str, path) -> Path:
    path = Path(path)
    fig, ax = plt.subplots(figsize=(7, 4))
    width = (hist.hi - hist.lo) / len(hist.counts)
    lefts = [lo for lo, _ in hist.bin_edges()]
    ax.bar(lefts, hist.counts, width=width, align="edge", edgecolor="white")
    ax.set_xlim(hist.lo, hist.hi)
    ax.set_title(title)
    ax.set_ylabel("pairs")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_stage_counts(report: RunReport, path) -> Path:
    path = Path(path)
    names = [s.name for s in report.stages]
    outputs = [s.output_count for s in report.stages]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.barh(range(len(names)), outputs)
    ax.set_yticks(range(len(names)))
    ax.set_yticklabels(names)
    ax.invert_yaxis()
    ax.set_xlabel("pairs out")
    ax.set_title(f"{report.recipe}: stage outputs")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_report_figures(report: RunReport, report_path) -> list[Path]:
    """Render all figures for a report, next to the report file."""
    report_path = Path(report_path)
    stem = report_path.parent / report_path.stem
    written = []
    for name, hist in report.histograms.items():
        written.append(render_histogram(hist, name.replace("_", " "), f"{stem}.{name}.png"))
    if report.stages:
        written.append(render_stage_counts(report, f"{stem}.stages.png"))
    return written
