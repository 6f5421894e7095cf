"""Run an experiment config trial by trial and write its report files."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from .config import ExperimentConfig
from .experiments import EXPERIMENT_FNS
from .metrics import scaling_fit

log = logging.getLogger(__name__)


@dataclass
class ExperimentReport:
    config: dict
    trials: list                      # {trial, seed, status, error, seconds, rows}
    aggregates: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    wall_clock: float = 0.0
    version: str = __version__

    @property
    def completed(self) -> bool:
        return all(t["status"] == "ok" for t in self.trials)

    @property
    def preset(self) -> str:
        return self.config.get("preset", "desk")

    def rows(self):
        """Per-trial metric rows of the trials that completed."""
        for t in self.trials:
            if t["status"] == "ok":
                for r in t["rows"]:
                    yield dict(r, trial=t["trial"], seed=t["seed"])

    def metric(self, metric: str, series: str | None = None) -> dict:
        """{x: [per-trial values]} for one metric (and series)."""
        out: dict = {}
        for r in self.rows():
            if r["metric"] == metric and (series is None or r["series"] == series):
                out.setdefault(r["x"], []).append(r["value"])
        return out

    def mean(self, metric: str, series: str | None = None) -> dict:
        return {x: float(np.mean(v)) for x, v in self.metric(metric, series).items()}

    def to_json(self) -> dict:
        return {"config": self.config, "preset": self.preset, "version": self.version,
                "wall_clock": self.wall_clock, "completed": self.completed,
                "trials": self.trials, "aggregates": self.aggregates, "fits": self.fits}

    def write(self, out_dir, figures: bool = True) -> dict:
        """Write report JSON, per-trial CSV, plot-data CSV and figures; returns the paths."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        name = self.config["experiment"]
        paths = {"report": out / f"{name}_report.json", "trials": out / f"{name}_trials.csv",
                 "plot_data": out / f"{name}_plot_data.csv"}
        paths["report"].write_text(json.dumps(_clean(self.to_json()), indent=1))
        with open(paths["trials"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["trial", "seed", "status", "series", "x", "metric", "value", "error"])
            for t in self.trials:
                if t["status"] != "ok":
                    w.writerow([t["trial"], t["seed"], t["status"], "", "", "", "", t["error"]])
                for r in t["rows"]:
                    w.writerow([t["trial"], t["seed"], t["status"], r["series"], r["x"],
                                r["metric"], repr(r["value"]), ""])
        with open(paths["plot_data"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["series", "x", "metric", "mean", "std", "n_trials"])
            for a in self.aggregates:
                w.writerow([a["series"], a["x"], a["metric"], repr(a["mean"]),
                            "" if a["std"] is None else repr(a["std"]), a["n"]])
        if figures and self.aggregates:
            from .plots import plot_report
            paths["figures"] = plot_report(self, out)
        return paths


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def aggregate(trials: list) -> list:
    """Mean and sample standard deviation per (series, x, metric) over completed trials."""
    groups: dict = {}
    for t in trials:
        if t["status"] != "ok":
            continue
        for r in t["rows"]:
            groups.setdefault((r["series"], r["x"], r["metric"]), []).append(r["value"])
    out = []
    for (series, x, metric), vals in groups.items():
        v = np.asarray(vals, float)
        std = float(np.std(v, ddof=1)) if len(v) > 1 else None
        out.append({"series": series, "x": x, "metric": metric, "mean": float(np.mean(v)),
                    "std": std, "n": len(v)})
    return out


def _fits(experiment: str, aggregates: list) -> dict:
    if experiment != "scaling":
        return {}
    fits = {}
    by_series: dict = {}
    for a in aggregates:
        if a["metric"] == "error":
            by_series.setdefault(a["series"], []).append((a["x"], a["mean"]))
    for s, pts in by_series.items():
        pts.sort()
        try:
            slope, icpt = scaling_fit([p[0] for p in pts], [p[1] for p in pts])
            fits[s] = {"slope": slope, "intercept": icpt}
        except ValueError as e:
            fits[s] = {"error": str(e)}
    return fits


def run_trial(cfg_json: dict, trial: int) -> dict:
    """One trial; errors are caught and recorded instead of raised."""
    cfg = ExperimentConfig(**cfg_json)
    seed = cfg.trial_seed(trial)
    fn = EXPERIMENT_FNS[cfg.experiment]
    t0 = time.perf_counter()
    try:
        rows = fn(cfg.params, cfg.models, seed)
        status, err = "ok", None
    except Exception as e:   # attributed to this trial; remaining trials still run
        log.warning("trial %d of %s failed: %s", trial, cfg.experiment, e)
        rows, status, err = [], "error", f"{type(e).__name__}: {e}"
    return {"trial": trial, "seed": seed, "status": status, "error": err,
            "seconds": time.perf_counter() - t0, "rows": rows}


def run(config: ExperimentConfig, *, write: bool = True, figures: bool = True) -> ExperimentReport:
    """Run every trial of ``config``; writes the report files when out_dir is set."""
    t0 = time.perf_counter()
    cj = config.to_json()
    if config.workers > 1 and config.trials > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            trials = list(pool.map(run_trial, [cj] * config.trials, range(config.trials)))
    else:
        trials = [run_trial(cj, t) for t in range(config.trials)]
    aggs = aggregate(trials)
    rep = ExperimentReport(cj, trials, aggs, _fits(config.experiment, aggs),
                           time.perf_counter() - t0)
    if write and config.out_dir:
        rep.write(config.out_dir, figures=figures)
    return rep
