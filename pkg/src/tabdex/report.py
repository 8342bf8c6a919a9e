"""Render a scenario report to files: JSON, CSV tables, and figures.

One precision-triangle heatmap and one metric-curve chart are written per
K, alongside the machine-readable report. All figures go through the Agg
backend so this works headless.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .evaluation import ScenarioReport

REPORT_FILE = "report.json"


def write_report_json(report: ScenarioReport, outdir: str | Path) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / REPORT_FILE
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_csv_tables(report: ScenarioReport, outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for k in report.ks:
        path = outdir / f"pmatrix_k{k}.csv"
        rows = report.pmatrix[k].rows()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["u"] + [f"w{w}" for w in range(report.pmatrix[k].stages)])
            for u, row in enumerate(rows):
                writer.writerow([u] + [f"{float(v):.6f}" for v in row] + [""] * (len(rows) - 1 - u))
        written.append(path)
    path = outdir / "metrics.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "stage", "ap", "lp", "ft", "replay_ft"])
        for k in report.ks:
            for u in range(len(report.ap[k])):
                lp = report.lp[k][u - 1] if u >= 1 else ""
                ft = report.ft[k][u - 1] if u >= 1 else ""
                rft = report.replay_ft[k][u - 1] if u >= 1 else ""
                writer.writerow([k, u, f"{report.ap[k][u]:.6f}", lp, ft, rft])
    written.append(path)
    return written


def render_figures(report: ScenarioReport, outdir: str | Path) -> list[Path]:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for k in report.ks:
        written.append(_heatmap(report, k, outdir / f"pmatrix_k{k}.png"))
        written.append(_curves(report, k, outdir / f"continual_k{k}.png"))
    return written


def _heatmap(report: ScenarioReport, k: int, path: Path) -> Path:
    stages = report.pmatrix[k].stages
    grid = np.full((stages, stages), np.nan)
    for u, row in enumerate(report.pmatrix[k].rows()):
        grid[u, : len(row)] = [float(v) for v in row]
    fig, ax = plt.subplots(figsize=(4.5, 4))
    im = ax.imshow(grid, vmin=0.0, vmax=1.0, cmap="viridis")
    for u in range(stages):
        for w in range(u + 1):
            ax.text(w, u, f"{grid[u, w]:.2f}", ha="center", va="center", fontsize=8,
                    color="white" if grid[u, w] < 0.6 else "black")
    ax.set_xlabel("test batch w")
    ax.set_ylabel("indexed through batch u")
    ax.set_title(f"P@{k} after each update")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def _curves(report: ScenarioReport, k: int, path: Path) -> Path:
    stages = len(report.ap[k])
    fig, ax = plt.subplots(figsize=(5.5, 3.5))
    ax.plot(range(stages), report.ap[k], marker="o", label=f"AP@{k}")
    if stages > 1:
        later = range(1, stages)
        ax.plot(later, report.lp[k], marker="s", label=f"LP@{k}")
        ax.plot(later, report.ft[k], marker="^", label=f"FT@{k}")
        ax.plot(later, report.replay_ft[k], marker="x", linestyle="--",
                label=f"replay FT@{k}")
    ax.set_xlabel("batch u")
    ax.set_ylabel("metric value")
    ax.set_ylim(-0.05, 1.05)
    ax.set_xticks(range(stages))
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def write_scenario_outputs(report: ScenarioReport, outdir: str | Path) -> dict[str, list[str]]:
    """Write everything; returns the file names grouped by kind."""
    json_path = write_report_json(report, outdir)
    csv_paths = write_csv_tables(report, outdir)
    fig_paths = render_figures(report, outdir)
    return {
        "report": [json_path.name],
        "csv": [p.name for p in csv_paths],
        "figures": [p.name for p in fig_paths],
    }
