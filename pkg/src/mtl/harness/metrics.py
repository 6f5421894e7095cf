"""Scores and the log-log scaling fit."""
from __future__ import annotations

import numpy as np


def _pair(y_true, y_pred):
    y = np.asarray(y_true, float).ravel()
    p = np.asarray(y_pred, float).ravel()
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.size} labels, {p.size} predictions")
    return y, p


def r_squared(y_true, y_pred) -> float:
    """1 - sum (p - y)^2 / sum (y - mean y)^2; the mean predictor scores 0."""
    y, p = _pair(y_true, y_pred)
    if y.size < 2:
        raise ValueError("r_squared needs at least two points")
    ss = np.sum((y - y.mean()) ** 2)
    if ss == 0:
        raise ValueError("r_squared undefined for constant labels")
    return float(1.0 - np.sum((p - y) ** 2) / ss)


def normalized_rmse(y_true, y_pred) -> float:
    """RMSE divided by the label range max(y) - min(y)."""
    y, p = _pair(y_true, y_pred)
    rng = y.max() - y.min() if y.size else 0.0
    if not rng > 0:
        raise ValueError("normalized_rmse undefined for a zero label range")
    return float(np.sqrt(np.mean((p - y) ** 2)) / rng)


def accuracy(y_true, y_pred, threshold: float = 0.5) -> float:
    """Fraction of 0/1 labels matched by thresholding the predictions."""
    y, p = _pair(y_true, y_pred)
    return float(np.mean((p > threshold) == (y > threshold)))


def scaling_fit(ns, errors) -> tuple[float, float]:
    """Least-squares (slope, intercept) of log(error) against log(n)."""
    n = np.asarray(ns, float)
    e = np.asarray(errors, float)
    if n.shape != e.shape or n.size < 4:
        raise ValueError("scaling_fit needs at least 4 (n, error) pairs")
    if np.any(n <= 0) or np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise ValueError("scaling_fit needs positive finite n and errors")
    if np.unique(n).size < 2:
        raise ValueError("scaling_fit needs at least two distinct n")
    slope, intercept = np.polyfit(np.log(n), np.log(e), 1)
    return float(slope), float(intercept)
