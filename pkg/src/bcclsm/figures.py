"""Figure rendering for the report-style CLI outputs.

Each function writes one PNG next to the delimited file it illustrates.
The object API (matplotlib.figure.Figure) is used throughout so no global
backend or pyplot state is touched; everything works headless.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure

from .calibration import CalibrationReport
from .engine import PathGrid
from .market_data import BucketReport

__all__ = [
    "fit_comparison_figure",
    "bucket_mse_figure",
    "chain_fit_figure",
    "stage_objective_figure",
    "path_fan_figure",
    "benchmark_figure",
]


def fit_comparison_figure(x, y, fits: dict[str, np.ndarray], path: str) -> None:
    """Scatter of (x, y) with each regressor's fitted curve overlaid."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    order = np.argsort(x)
    fig = Figure(figsize=(8.0, 5.0))
    ax = fig.add_subplot(111)
    ax.scatter(x, y, s=12, color="0.6", label="data", zorder=1)
    for name, yhat in fits.items():
        ax.plot(x[order], np.asarray(yhat, dtype=float)[order],
                linewidth=1.6, label=name, zorder=2)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend()
    ax.set_title("Regressor fit comparison")
    fig.tight_layout()
    fig.savefig(path, dpi=120)


def bucket_mse_figure(report: BucketReport, path: str) -> None:
    """Bar chart of per-bucket MSE; empty buckets drawn at zero height."""
    labels = [f"{e.bucket.maturity.value}\n{e.bucket.moneyness.value}"
              for e in report.entries]
    values = [e.mse if e.mse is not None else 0.0 for e in report.entries]
    counts = [e.count for e in report.entries]
    fig = Figure(figsize=(8.0, 5.0))
    ax = fig.add_subplot(111)
    bars = ax.bar(range(len(labels)), values, color="#4878a8")
    for rect, count in zip(bars, counts):
        ax.annotate(f"n={count}", (rect.get_x() + rect.get_width() / 2.0,
                                   rect.get_height()),
                    ha="center", va="bottom", fontsize=8)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, fontsize=9)
    ax.set_ylabel("mean squared error")
    if report.overall_mse is not None:
        ax.axhline(report.overall_mse, color="0.3", linestyle="--",
                   linewidth=1.0, label=f"overall {report.overall_mse:.4g}")
        ax.legend()
    ax.set_title("Pricing error by bucket")
    fig.tight_layout()
    fig.savefig(path, dpi=120)


def chain_fit_figure(strikes, maturities, mids, model_prices, path: str) -> None:
    """Model-vs-market prices per expiry, market as points, model as lines."""
    strikes = np.asarray(strikes, dtype=float)
    maturities = np.asarray(maturities, dtype=float)
    mids = np.asarray(mids, dtype=float)
    model_prices = np.asarray(model_prices, dtype=float)
    fig = Figure(figsize=(8.0, 5.0))
    ax = fig.add_subplot(111)
    first = True
    for t in sorted(set(maturities.tolist())):
        sel = maturities == t
        order = np.argsort(strikes[sel])
        label_m = "market" if first else None
        label_f = "model" if first else None
        ax.plot(strikes[sel][order], mids[sel][order], "o", markersize=4,
                color="0.45", label=label_m)
        ax.plot(strikes[sel][order], model_prices[sel][order], "-",
                linewidth=1.4, label=label_f, color="#b0413e")
        first = False
    ax.set_xlabel("strike")
    ax.set_ylabel("put price")
    ax.set_title("Calibrated model vs market quotes (one line per expiry)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)


def stage_objective_figure(report: CalibrationReport, path: str) -> None:
    """Objective before/after per calibration stage, log scale."""
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot(111)
    stages = [s.stage for s in report.stages]
    ins = [s.objective_in for s in report.stages]
    outs = [s.objective_out for s in report.stages]
    width = 0.38
    xs = np.arange(len(stages), dtype=float)
    floor = 1e-18  # log-scale bars need a positive floor
    ax.bar(xs - width / 2.0, np.maximum(ins, floor), width, label="objective in",
           color="0.65")
    ax.bar(xs + width / 2.0, np.maximum(outs, floor), width, label="objective out",
           color="#4878a8")
    ax.set_yscale("log")
    ax.set_xticks(xs)
    ax.set_xticklabels([f"stage {s}" for s in stages])
    ax.set_ylabel("objective")
    ax.set_title("Calibration progress by stage")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)


def path_fan_figure(grid: PathGrid, path: str, max_paths: int = 120) -> None:
    """A fan of simulated index paths with the cross-path mean overlaid."""
    n = min(max_paths, grid.paths)
    t = np.linspace(0.0, grid.horizon, grid.steps + 1)
    fig = Figure(figsize=(8.0, 5.0))
    ax = fig.add_subplot(111)
    for i in range(n):
        ax.plot(t, grid.index[i], linewidth=0.5, alpha=0.35, color="#4878a8")
    ax.plot(t, grid.index.mean(axis=0), linewidth=1.8, color="#b0413e",
            label="cross-path mean")
    ax.set_xlabel("years")
    ax.set_ylabel("index level")
    ax.set_title(f"Simulated index paths ({n} of {grid.paths} shown)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)


def benchmark_figure(rows: list[tuple[str, float, float]], reference: float,
                     path: str) -> None:
    """Price per method against the binomial reference line."""
    names = [r[0] for r in rows]
    prices = [r[1] for r in rows]
    fig = Figure(figsize=(7.0, 4.5))
    ax = fig.add_subplot(111)
    ax.bar(range(len(names)), prices, color="#4878a8")
    ax.axhline(reference, color="0.3", linestyle="--", linewidth=1.0,
               label=f"binomial {reference:.3f}")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names)
    ax.set_ylabel("price")
    lo = min(prices + [reference])
    hi = max(prices + [reference])
    pad = 0.2 * (hi - lo) + 0.01
    ax.set_ylim(lo - pad, hi + pad)
    ax.set_title("American put benchmark")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
