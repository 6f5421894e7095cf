"""Learning-bound constants M and sample complexities via the tilde calculus.

Every bound is carried as log(sqrt M) so that exponential-size constants
(margin trees, gravity) remain representable; ``sqrt_M`` and ``M`` are inf
when they overflow float64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import RadiusError
from .series import (C_ERF, PowerSeries1D, MultiSeries, TildeSeries, derivative,
                     erf_indicator, evaluate, tilde)

C_POLY = 2.0


def _exp(v: float) -> float:
    return math.exp(v) if v < 709.0 else math.inf


@dataclass(frozen=True)
class LearnBound:
    log_sqrt_M: float
    degree: int = 0
    rule_trace: tuple[str, ...] = ()
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_sqrt(cls, sqrt_M: float, degree=0, trace=(), **extra):
        if sqrt_M < 0:
            raise ValueError("sqrt_M must be nonnegative")
        lv = math.log(sqrt_M) if sqrt_M > 0 else -math.inf
        return cls(lv, int(degree), tuple(trace), dict(extra))

    @classmethod
    def from_M(cls, M: float, degree=0, trace=(), **extra):
        return cls.from_sqrt(math.sqrt(M), degree, trace, **extra)

    @property
    def sqrt_M(self) -> float:
        return _exp(self.log_sqrt_M)

    @property
    def M(self) -> float:
        return _exp(2 * self.log_sqrt_M)

    @property
    def log10_sqrt_M(self) -> float:
        return self.log_sqrt_M / math.log(10)

    def to_json(self) -> dict:
        def clean(v):
            return v if not (isinstance(v, float) and not math.isfinite(v)) else str(v)
        out = {"sqrt_M": clean(self.sqrt_M), "M": clean(self.M),
               "log10_sqrt_M": clean(self.log10_sqrt_M), "degree": self.degree,
               "rule_trace": list(self.rule_trace)}
        out.update({k: clean(v) for k, v in self.extra.items()})
        return out


@dataclass(frozen=True)
class ComplexityQuery:
    eps: float
    delta: float
    C: float = 1.0

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if not self.C > 0:
            raise ValueError("C must be positive")


def sample_complexity(b: LearnBound, q: ComplexityQuery) -> int:
    """n = ceil(C (M + ln(1/delta)) / eps^2)."""
    n = q.C * (b.M + math.log(1 / q.delta)) / q.eps**2
    if not math.isfinite(n):
        raise OverflowError("sample complexity exceeds float range; use log10_sqrt_M")
    # guard against 2.0000000000000004-style rounding pushing the ceiling up
    return int(math.ceil(n - 1e-9 * max(1.0, n)))


# ---------------------------------------------------------------------------
# analytic functions


def univariate_bound(g: PowerSeries1D, beta: float = 1.0) -> LearnBound:
    """sqrt M = beta g~'(beta) + g~(0) for g(beta . x)."""
    gt = g.tilde() if not isinstance(g, TildeSeries) else g
    if not beta < gt.radius:
        raise RadiusError(f"beta={beta} outside declared radius {gt.radius}")
    val = beta * evaluate(derivative(gt), beta) + gt.coeffs[0]
    return LearnBound.from_sqrt(val, gt.degree, ("univariate",))


def multivariate_bound(g: MultiSeries | TildeSeries) -> LearnBound:
    """sqrt M = g~'(1) + g~(0)."""
    gt = tilde(g) if isinstance(g, MultiSeries) else g
    val = evaluate(derivative(gt), 1.0) + gt.coeffs[0]
    return LearnBound.from_sqrt(val, gt.degree, ("multivariate",))


def low_degree_bound(g: TildeSeries, p: int) -> LearnBound:
    """M = p g~(1) for a degree-p polynomial."""
    if g.degree > p:
        raise ValueError(f"series degree {g.degree} exceeds p={p}")
    return LearnBound.from_M(p * evaluate(g, 1.0), p, ("low_degree",))


def kernel_series_bound(a: Sequence[float], beta: Sequence[float],
                        b: Sequence[float]) -> LearnBound:
    """sqrt M = sum_k b_k^{-1/2} |a_k| ||beta_k||^k.

    Entries of ``beta`` may be scalars (norms) or vectors. Degrees with a_k = 0
    are skipped, so beta and b only matter where a_k is nonzero.
    """
    total = 0.0
    deg = 0
    for k, ak in enumerate(a):
        if ak == 0:
            continue
        bk = b[k] if k < len(b) else 0.0
        if not bk > 0:
            raise ValueError(f"kernel coefficient b_{k} must be positive where a_{k} != 0")
        norm = float(np.linalg.norm(np.atleast_1d(beta[k])))
        total += abs(ak) * norm**k / math.sqrt(bk)
        deg = k
    return LearnBound.from_sqrt(total, deg, ("kernel_series",))


def relu_rate(max_k: int) -> list[float]:
    """b_k = k^{-2}; b_0 = inf so the constant term costs nothing."""
    return [math.inf] + [k**-2.0 for k in range(1, max_k + 1)]


def product_rule_bound(g: TildeSeries, h: TildeSeries) -> LearnBound:
    """sqrt M = g~'(1) h~(1) + g~(1) h~'(1) + g~(0) h~(0)."""
    g1, h1 = evaluate(g, 1.0), evaluate(h, 1.0)
    gd, hd = evaluate(derivative(g), 1.0), evaluate(derivative(h), 1.0)
    val = gd * h1 + g1 * hd + g.coeffs[0] * h.coeffs[0]
    return LearnBound.from_sqrt(val, g.degree + h.degree, ("product",))


def chain_rule_bound(g: TildeSeries, h: TildeSeries) -> LearnBound:
    """sqrt M = g~'(h~(1)) h~'(1) + g~(h~(0)) for g(h(x))."""
    h0, h1 = h.coeffs[0], evaluate(h, 1.0)
    if not h1 < g.radius:
        raise RadiusError(f"inner tilde at 1 ({h1}) outside outer radius {g.radius}")
    val = evaluate(derivative(g), h1) * evaluate(derivative(h), 1.0) + evaluate(g, h0)
    return LearnBound.from_sqrt(val, g.degree * max(h.degree, 1), ("chain",))


# ---------------------------------------------------------------------------
# task-structured classes


def cluster_indicator(r: float, eps: float, k: int = 1, c_norm: float = 1.0):
    """Indicator of ||x - c|| <= r/3 versus >= 2r/3 for unit-norm x.

    On the sphere ||x - c||^2 = 1 + ||c||^2 - 2 c.x, so membership is a
    threshold on c_hat . x at (1 + ||c||^2 - 5r^2/18) / (2||c||) with margin
    r^2 / (6||c||).
    """
    alpha = (1 + c_norm**2 - 5 * r**2 / 18) / (2 * c_norm)
    gamma = r**2 / (6 * c_norm)
    return erf_indicator(gamma, eps / k, alpha, domain=max(1.0, abs(alpha) + gamma))


def cluster_bound(leaf_tildes: Sequence[TildeSeries], p: int, k: int, eps: float,
                  r: float, c_poly: float = C_POLY) -> LearnBound:
    """M = p (k/eps)^c_poly sum_j f~_j(6/r)."""
    if not 0 < r <= 1 / 6:
        raise ValueError("separation r must lie in (0, 1/6]")
    if k < 1:
        raise ValueError("need at least one cluster")
    leaf_sum = sum(evaluate(f, 6 / r) for f in leaf_tildes)
    log_M = math.log(p * leaf_sum) + c_poly * math.log(k / eps) if p * leaf_sum > 0 else -math.inf
    ind = cluster_indicator(r, eps, k)
    log_ind, _ = ind.log_tilde(1.0)
    return LearnBound(log_M / 2, p, ("cluster", f"poly(k/eps)=(k/eps)^{c_poly:g}"),
                      {"c_poly": c_poly, "log_indicator_tilde_at_1": log_ind,
                       "indicator_degree": ind.degree})


def boolean_tree_bound(d: int, h: int) -> LearnBound:
    """M = h d^h for a depth-h tree over Boolean coordinates."""
    if d < 1 or h < 0:
        raise ValueError("need d >= 1 and h >= 0")
    if h == 0:
        return LearnBound(-math.inf, 0, ("boolean_tree",))
    log_M = math.log(h) + h * math.log(d)
    return LearnBound(log_M / 2, h, ("boolean_tree",))


def margin_tree_bound(h: int, gamma: float, eps: float, p: int, leaf_tilde_sum: float,
                      c_m: float = C_ERF) -> LearnBound:
    """M = exp(c_m h log(1/eps)/gamma^2) (p + h log(1/eps)/gamma^2) sum_j f~_j(1)."""
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    depth_deg = h * math.log(1 / eps) / gamma**2
    factor = (p + depth_deg) * leaf_tilde_sum
    if factor <= 0:
        return LearnBound(-math.inf, p, ("margin_tree",))
    log_M = c_m * depth_deg + math.log(factor)
    degree = p + h * math.ceil(c_m * math.log(1 / eps) / gamma**2)
    return LearnBound(log_M / 2, degree, ("margin_tree",), {"c_m": c_m})


# ---------------------------------------------------------------------------
# gravity


def gravity_degree(k: int, R: float, eps: float) -> int:
    return math.ceil(R**2 * math.log(k**2 / eps))


def gravity_bound(k: int, R: float, eps: float) -> LearnBound:
    """sqrt M = k^{-1/2} L^{3/2} (24k)^L with L = R^2 ln(k^2/eps), in log space."""
    if k < 2 or R < 1 or not 0 < eps < 1:
        raise ValueError("need k >= 2, R >= 1, eps in (0, 1)")
    L = R**2 * math.log(k**2 / eps)
    log_s = -0.5 * math.log(k) + 1.5 * math.log(L) + L * math.log(24 * k)
    d = gravity_degree(k, R, eps)
    return LearnBound(log_s, d, ("gravity",), {"truncation_degree": d})


@dataclass(frozen=True, eq=False)
class GravitySeries:
    """Truncated expansion of r^{-3} = a^{-3} (1 - u)^{-3/2} with u = 1 - r^2/a^2."""

    series: PowerSeries1D
    a2: float
    r_min: float
    r_max: float

    @property
    def degree(self) -> int:
        return self.series.degree_cap

    def u(self, r):
        return 1.0 - np.asarray(r, float) ** 2 / self.a2

    def __call__(self, r):
        return self.a2**-1.5 * evaluate(self.series, self.u(r))

    def lagrange_bound(self, r):
        """sqrt(pi d) |u|^(d+1) / (1 - |u|)^(5/2 + d), scaled by a^{-3}."""
        d = self.degree
        au = np.abs(self.u(r))
        with np.errstate(divide="ignore", over="ignore"):
            b = math.sqrt(math.pi * max(d, 1)) * au ** (d + 1) / (1 - au) ** (2.5 + d)
        return self.a2**-1.5 * b


def inverse_cube_coeffs(d: int) -> np.ndarray:
    """(2n+1)!!/(2n)!! for n = 0..d, the series of (1 - x)^{-3/2}."""
    n = np.arange(d + 1)
    # (2n+1)!!/(2n)!! = Gamma(n + 3/2) / (Gamma(3/2) n!)
    return np.exp(gammaln(n + 1.5) - gammaln(1.5) - gammaln(n + 1))


def gravity_series(R: float, eps: float, a2: float, k: int | None = None) -> GravitySeries:
    """r^{-3} on [r_min, R r_min] where a^2 = (r_min^2 + r_max^2)/2.

    Degree is ceil(R^2 ln(k^2/eps)); without a body count the k^2 factor is dropped.
    """
    if R < 1 or not 0 < eps < 1 or not a2 > 0:
        raise ValueError("need R >= 1, eps in (0, 1), a2 > 0")
    d = gravity_degree(k, R, eps) if k else math.ceil(R**2 * math.log(1 / eps))
    r_min = math.sqrt(2 * a2 / (1 + R**2))
    return GravitySeries(PowerSeries1D(inverse_cube_coeffs(d), radius=1.0), a2, r_min, R * r_min)


__all__ = [
    "C_POLY", "LearnBound", "ComplexityQuery", "sample_complexity", "univariate_bound",
    "multivariate_bound", "low_degree_bound", "kernel_series_bound", "relu_rate",
    "product_rule_bound", "chain_rule_bound", "cluster_indicator", "cluster_bound",
    "boolean_tree_bound", "margin_tree_bound", "gravity_degree", "gravity_bound",
    "GravitySeries", "inverse_cube_coeffs", "gravity_series",
]
