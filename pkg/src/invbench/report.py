"""Rendering of benchmark artifacts: the %-of-Oracle table as delimited
output plus summary figures alongside it."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import (REGIME_GROUPS, PctOracleReport, pct_of_oracle,
                    pct_report_rows, read_results_csv)

GROUP_LABELS = {
    "stationary": "Stationary",
    "nonstationary_exogenous": "Non-stationary",
    "endogenous": "Endogenous",
    "all": "All",
}


def write_pct_table(report: PctOracleReport, path) -> None:
    header, rows = pct_report_rows(report)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def plot_pct_by_regime(report: PctOracleReport, path) -> None:
    """Grouped bars: each agent's mean % of Oracle per regime group."""
    agents = report.agents
    groups = list(REGIME_GROUPS) + ["all"]
    fig, ax = plt.subplots(figsize=(max(6.0, 1.6 * len(agents)), 4.0))
    width = 0.8 / len(groups)
    xs = np.arange(len(agents))
    for gi, group in enumerate(groups):
        vals = [report.aggregates.get((a, group), (np.nan, 0.0))[0] for a in agents]
        errs = [report.aggregates.get((a, group), (np.nan, 0.0))[1] for a in agents]
        ax.bar(xs + gi * width, vals, width=width, yerr=errs, capsize=2,
               label=GROUP_LABELS[group])
    ax.set_xticks(xs + 0.4 - width / 2)
    ax.set_xticklabels(agents, rotation=30, ha="right")
    ax.set_ylabel("% of Oracle profit")
    ax.axhline(100.0, color="gray", lw=0.8, ls="--")
    ax.legend(fontsize=8)
    ax.set_title("Scenario-wise % of Oracle by demand regime")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_pct_heatmap(report: PctOracleReport, path) -> None:
    """Agent x scenario heatmap of % of Oracle."""
    agents = report.agents
    scenarios = report.scenarios
    data = np.full((len(agents), len(scenarios)), np.nan)
    for i, a in enumerate(agents):
        for j, s in enumerate(scenarios):
            pct = report.per_scenario.get((a, s))
            if pct is not None:
                data[i, j] = pct
    fig, ax = plt.subplots(
        figsize=(max(7.0, 0.45 * len(scenarios)), max(3.0, 0.45 * len(agents))))
    im = ax.imshow(data, aspect="auto", cmap="RdYlGn", vmin=0, vmax=110)
    ax.set_xticks(range(len(scenarios)))
    ax.set_xticklabels(scenarios, rotation=90, fontsize=6)
    ax.set_yticks(range(len(agents)))
    ax.set_yticklabels(agents, fontsize=8)
    fig.colorbar(im, ax=ax, label="% of Oracle")
    ax.set_title("% of Oracle profit per scenario")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report(results_csv, out_dir, metric: str = "pct-oracle") -> list[Path]:
    """Build the report artifacts for a results file; returns written paths."""
    if metric != "pct-oracle":
        raise ValueError(f"unknown metric {metric!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = read_results_csv(results_csv)
    report = pct_of_oracle(rows)
    written = []
    table = out / "pct_oracle.csv"
    write_pct_table(report, table)
    written.append(table)
    bars = out / "pct_oracle_by_regime.png"
    plot_pct_by_regime(report, bars)
    written.append(bars)
    heat = out / "pct_oracle_heatmap.png"
    plot_pct_heatmap(report, heat)
    written.append(heat)
    if report.diagnostics:
        diag = out / "diagnostics.txt"
        diag.write_text("\n".join(report.diagnostics) + "\n")
        written.append(diag)
    return written
