"""Experiment outputs.

Writes the per-run value files (one decimal per line), a machine-readable
JSON report with histogram bin counts, a human-readable summary table, and
histogram figures rendered next to the delimited output. Every file is
byte-deterministic for a given experiment.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .harness import AggregateStats, ExperimentConfig, ExperimentResult

MIN_BINS = 10

SAV_FILE = "sav.txt"
TOTAL_FILE = "total.txt"
REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.txt"


def fd_bin_count(values, min_bins: int = MIN_BINS) -> int:
    """Freedman-Diaconis bin count over the pooled values, floored at min_bins."""
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = float(arr.min()), float(arr.max())
    if hi <= lo:
        return min_bins
    q75, q25 = np.percentile(arr, [75.0, 25.0])
    width = 2.0 * (q75 - q25) / arr.size ** (1.0 / 3.0)
    if width <= 0.0:
        return min_bins
    return max(min_bins, int(np.ceil((hi - lo) / width)))


def histogram(values, min_bins: int = MIN_BINS) -> dict:
    """Bin counts and edges for a set of run outcomes."""
    arr = np.asarray(values, dtype=np.float64)
    counts, edges = np.histogram(arr, bins=fd_bin_count(arr, min_bins))
    return {
        "bin_edges": [float(e) for e in edges],
        "counts": [int(c) for c in counts],
    }


def _write_values(path: Path, values) -> None:
    # repr keeps the full double precision, matching line-per-run text output
    path.write_text("".join(f"{float(v)!r}\n" for v in values))


def _summary_table(
    twth: AggregateStats, sav: AggregateStats | None, threshold: float
) -> str:
    rows = []
    label = f"P(twth<={threshold:g})"
    rows.append(f"{'':12} {'Mean':>12} {'Median':>12} {'St. Dev.':>12} {label:>16}")
    rows.append(
        f"{'twth':12} {twth.mean:12.3f} {twth.median:12.3f} "
        f"{twth.std_dev:12.3f} {twth.p_loss:16.3f}"
    )
    if sav is not None:
        rows.append(
            f"{'sav':12} {sav.mean:12.3f} {sav.median:12.3f} "
            f"{sav.std_dev:12.3f} {'-':>16}"
        )
    return "\n".join(rows) + "\n"


def _render_histogram(hist: dict, stats: AggregateStats, title: str, path: Path) -> None:
    # draw straight onto an Agg canvas; no pyplot, no global backend switch
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    edges = np.asarray(hist["bin_edges"])
    counts = np.asarray(hist["counts"])
    fig = Figure(figsize=(6.4, 4.2))
    FigureCanvasAgg(fig)
    ax = fig.subplots()
    ax.bar(
        edges[:-1],
        counts,
        width=np.diff(edges),
        align="edge",
        color="steelblue",
        edgecolor="white",
        linewidth=0.5,
    )
    ax.set_title(f"{title}  (min={stats.min:.3f}, max={stats.max:.3f})")
    ax.set_xlabel(title)
    ax.set_ylabel("runs")
    fig.tight_layout()
    fig.savefig(path, dpi=150)


def emit_report(
    result: ExperimentResult,
    config: ExperimentConfig,
    out_dir,
    figures: bool = True,
) -> list[Path]:
    """Write all experiment outputs into ``out_dir`` and return the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    sav_path = out / SAV_FILE
    _write_values(sav_path, (r.final_sav for r in result.results))
    written.append(sav_path)

    total_path = out / TOTAL_FILE
    _write_values(total_path, (r.final_twth for r in result.results))
    written.append(total_path)

    twth_hist = histogram([r.final_twth for r in result.results])
    sav_hist = (
        histogram([r.final_sav for r in result.results])
        if result.sav is not None
        else None
    )

    report = {
        "config": config.to_dict(),
        "n_runs": len(result.results),
        "loss_threshold": config.resolved_loss_threshold,
        "twth": result.twth.to_dict(),
        "sav": result.sav.to_dict() if result.sav is not None else None,
        "histograms": {"twth": twth_hist, "sav": sav_hist},
    }
    report_path = out / REPORT_FILE
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    written.append(report_path)

    summary_path = out / SUMMARY_FILE
    summary_header = (
        f"Backtest summary: mode={config.mode}, runs={config.runs}, "
        f"seed={config.master_seed}\n\n"
    )
    summary_path.write_text(
        summary_header
        + _summary_table(result.twth, result.sav, config.resolved_loss_threshold)
    )
    written.append(summary_path)

    if figures:
        twth_fig = out / "twth_hist.png"
        _render_histogram(twth_hist, result.twth, "twth", twth_fig)
        written.append(twth_fig)
        if sav_hist is not None:
            sav_fig = out / "sav_hist.png"
            _render_histogram(sav_hist, result.sav, "sav", sav_fig)
            written.append(sav_fig)
    return written


def write_trace(records, path) -> Path:
    """Write step records as line-delimited JSON."""
    path = Path(path)
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict()) + "\n")
    return path
