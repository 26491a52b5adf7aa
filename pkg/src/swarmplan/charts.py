"""Line-chart rendering for sweep results.

Charts are standalone SVG files (one per metric series, mean with sample
standard-deviation error bars) and are a convenience for eyeballing the
CSVs, which stay authoritative.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "swarmplan"

import matplotlib.pyplot as plt
import numpy as np

from .metrics import InsufficientPointsError, TrendModel, fit_trend
from .scenario_io import MetricsRow

PARAM_LABELS = {
    "uavs": "number of UAVs",
    "area": "area surface (m^2)",
    "gps-error": "GPS error radius (m)",
}

METRIC_LABELS = {
    "pair_slot_collisions": "pair-slot collisions",
    "distinct_pair_collisions": "distinct colliding pairs",
    "mean_extra_distance": "mean extra distance (m)",
    "total_planning_time_s": "total planning time (s)",
}


def _series(rows: list[MetricsRow], metric: str) -> tuple[list[float], list[float], list[float]]:
    """Per-value mean and sample std of a metric over completed rows."""
    values = sorted({row.value for row in rows})
    means, stds = [], []
    for value in values:
        samples = np.array(
            [getattr(r, metric) for r in rows if r.value == value and r.completed]
        )
        samples = samples[np.isfinite(samples)]
        if samples.size:
            means.append(float(samples.mean()))
            stds.append(float(samples.std(ddof=1)) if samples.size > 1 else 0.0)
        else:
            means.append(math.nan)
            stds.append(math.nan)
    return values, means, stds


def render_metric_chart(
    rows: list[MetricsRow], metric: str, out_path: str | Path
) -> Path:
    values, means, stds = _series(rows, metric)
    param = rows[0].swept_param if rows else ""
    fig, ax = plt.subplots(figsize=(5.0, 3.2))
    ax.errorbar(values, means, yerr=stds, marker="o", capsize=3, linewidth=1.2)
    ax.set_xlabel(PARAM_LABELS.get(param, param))
    ax.set_ylabel(METRIC_LABELS.get(metric, metric))
    ax.grid(True, alpha=0.4)
    ax.spines["right"].set_visible(False)
    ax.spines["top"].set_visible(False)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return out_path


def trend_summary(rows: list[MetricsRow]) -> str:
    """Linear/quadratic fits with R^2 for each metric's per-value means."""
    lines = []
    for metric in METRIC_LABELS:
        values, means, _ = _series(rows, metric)
        xs = [v for v, m in zip(values, means) if math.isfinite(m)]
        ys = [m for m in means if math.isfinite(m)]
        lines.append(f"{metric}:")
        for model in (TrendModel.LINEAR, TrendModel.QUADRATIC):
            try:
                coeffs, r2 = fit_trend(xs, ys, model)
            except InsufficientPointsError:
                lines.append(f"  {model.value:9s}  (not enough points)")
                continue
            poly = ", ".join(f"{c:.6g}" for c in coeffs)
            lines.append(f"  {model.value:9s}  coeffs=[{poly}]  R^2={r2:.4f}")
    return "\n".join(lines) + "\n"


def render_report(rows: list[MetricsRow], outdir: str | Path) -> list[Path]:
    """One SVG per metric series plus a trend-fit summary text file."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for metric in METRIC_LABELS:
        written.append(render_metric_chart(rows, metric, outdir / f"{metric}.svg"))
    summary_path = outdir / "trend_summary.txt"
    summary_path.write_text(trend_summary(rows))
    written.append(summary_path)
    return written
