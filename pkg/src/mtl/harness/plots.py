"""Static line charts of report aggregates (one SVG per metric)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_LABELS = {"accuracy": "test accuracy", "r2": "test R²", "nrmse": "normalized RMSE",
           "error": "relative test RMSE", "sqrt_complexity": "sqrt(yᵀH⁺y)",
           "series_bound": "series bound"}
_XLABELS = {"clusters": "clusters k", "tree": "margin γ", "sql": "WHERE columns",
            "gravity": "bodies k / degree", "scaling": "training samples n",
            "complexity_probe": "target degree k", "parity_control": "parity support s"}


def plot_report(report, out_dir) -> list[Path]:
    out = Path(out_dir)
    exp = report.config["experiment"]
    metrics = sorted({a["metric"] for a in report.aggregates})
    paths = []
    for metric in metrics:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        series = sorted({a["series"] for a in report.aggregates if a["metric"] == metric})
        for s in series:
            pts = sorted((a["x"], a["mean"], a["std"] or 0.0) for a in report.aggregates
                         if a["metric"] == metric and a["series"] == s)
            xs, ys, es = zip(*pts)
            ax.errorbar(xs, ys, yerr=es, marker="o", capsize=3, label=s)
        if exp == "scaling":
            ax.set_xscale("log")
            ax.set_yscale("log")
        ax.set_xlabel(_XLABELS.get(exp, "x"))
        ax.set_ylabel(_LABELS.get(metric, metric))
        ax.set_title(f"{exp} ({report.preset})")
        if len(series) > 1:
            ax.legend(fontsize=8)
        fig.tight_layout()
        path = out / f"{exp}_{metric}.svg"
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        paths.append(path)
    return paths
