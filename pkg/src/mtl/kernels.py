"""Dot-product kernels on the unit sphere, Gram assembly and kernel regression.

All kernels here are functions of t = x . x' only. Their Taylor coefficients
b_k in t drive the kernel-series learning bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammaln

from .errors import KernelError

FAMILIES = ("relu_bias_ntk", "relu_bias_nngp", "gaussian_sphere", "slow_decay")
ALIASES = {"relu_bias": "relu_bias_ntk", "relu": "relu_bias_ntk", "gaussian": "gaussian_sphere",
           "nngp": "relu_bias_nngp"}
UNIT_TOL = 1e-6


@dataclass(frozen=True)
class KernelSpec:
    family: str = "relu_bias_ntk"
    r: float = 1.0      # gaussian_sphere radius
    s: float = 2.0      # slow_decay exponent
    D: int = 20         # slow_decay truncation

    def __post_init__(self):
        fam = ALIASES.get(self.family, self.family)
        if fam not in FAMILIES:
            raise KernelError(f"unknown kernel family {self.family!r}")
        object.__setattr__(self, "family", fam)
        if not self.r > 0:
            raise KernelError("radius r must be positive")
        if not 1 < self.s <= 2:
            raise KernelError("slow-decay exponent s must lie in (1, 2]")
        if self.D < 1:
            raise KernelError("slow-decay degree D must be >= 1")

    def __call__(self, t):
        return kernel_fn(self, t)


def kernel_fn(spec: KernelSpec, t):
    """The kernel as a function of the inner product t, clamped to [-1, 1]."""
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    if spec.family == "relu_bias_ntk":
        u = (t + 1) / 2
        return u * (np.pi - np.arccos(u)) / (2 * np.pi)
    if spec.family == "relu_bias_nngp":
        # arc-cosine kernel of order one on the bias-augmented unit vectors
        u = (t + 1) / 2
        theta = np.arccos(u)
        return (np.sin(theta) + (np.pi - theta) * u) / (2 * np.pi)
    if spec.family == "gaussian_sphere":
        return np.exp(spec.r**2 * (t - 1))
    k = np.arange(1, spec.D + 1)
    return np.power.outer(t, k) @ k ** -spec.s


def _check_unit(X: np.ndarray, what="input"):
    norms = np.linalg.norm(X, axis=-1)
    if not np.all(np.abs(norms - 1) <= UNIT_TOL):
        bad = float(np.max(np.abs(norms - 1)))
        raise KernelError(f"{what} rows must be unit vectors (max norm deviation {bad:.3g})")


def kernel_eval(spec: KernelSpec, x, xp) -> float:
    x, xp = np.asarray(x, float), np.asarray(xp, float)
    _check_unit(x)
    _check_unit(xp)
    return float(kernel_fn(spec, x @ xp))


def kernel_matrix(spec: KernelSpec, X, Y=None, check=True) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, float))
    if check:
        _check_unit(X)
        _check_unit(Y)
    return kernel_fn(spec, X @ Y.T)


def kernel_coeffs(spec: KernelSpec, max_k: int) -> np.ndarray:
    """Taylor coefficients b_0..b_max_k of the kernel in t around 0."""
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    k = np.arange(max_k + 1)
    if spec.family == "gaussian_sphere":
        r2 = spec.r**2
        return np.exp(-r2 + k * math.log(r2) - gammaln(k + 1))
    if spec.family == "slow_decay":
        out = np.zeros(max_k + 1)
        kk = k[1: min(max_k, spec.D) + 1]
        out[kk] = kk ** -spec.s
        return out
    return _cauchy_coeffs(lambda t: kernel_fn_complex(spec, t), max_k)


def kernel_fn_complex(spec: KernelSpec, t):
    # Analytic continuation of the ReLU kernels inside the disc |t| < 1.
    u = (t + 1) / 2
    if spec.family == "relu_bias_ntk":
        return u * (np.pi / 2 + np.arcsin(u)) / (2 * np.pi)
    return (np.sqrt(1 - u * u) + (np.pi / 2 + np.arcsin(u)) * u) / (2 * np.pi)


def _cauchy_coeffs(f, max_k: int, rho: float = 0.9, n: int = 8192) -> np.ndarray:
    """Taylor coefficients from samples on the circle |t| = rho (trapezoid rule / FFT)."""
    n = max(n, 4 * (max_k + 1))
    t = rho * np.exp(2j * np.pi * np.arange(n) / n)
    vals = f(t)
    if not np.all(np.isfinite(vals)):
        raise KernelError("kernel not finite on the contour")
    c = np.fft.fft(vals) / n
    out = (c[: max_k + 1] / rho ** np.arange(max_k + 1)).real
    if not np.all(np.isfinite(out)):
        raise KernelError("numeric Taylor coefficients are not finite")
    return out


# ---------------------------------------------------------------------------
# Gram matrices and regression


@dataclass(eq=False)
class GramMatrix:
    H: np.ndarray
    jitter: float
    spec: KernelSpec | None = None
    X: np.ndarray | None = None
    _chol: tuple = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.H)

    def solve(self, y, ridge: float = 0.0) -> np.ndarray:
        y = np.asarray(y, float)
        if ridge == 0.0:
            return cho_solve(self._chol, y)
        A = self.H + (self.jitter + ridge) * np.eye(self.n)
        try:
            return cho_solve(cho_factor(A, lower=True), y)
        except np.linalg.LinAlgError as e:
            raise KernelError(f"ridge system singular: {e}") from e


def factorize(H: np.ndarray, jitter: float | None = None, spec=None, X=None) -> GramMatrix:
    """Cholesky of H + lambda0 I with escalating jitter.

    lambda0 starts at ``jitter`` (default 1e-10 trace/n) and grows tenfold up
    to 1e-4 trace/n.
    """
    H = np.asarray(H, float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise KernelError("Gram matrix must be square")
    if not np.allclose(H, H.T, atol=1e-10, rtol=0):
        raise KernelError("Gram matrix is not symmetric")
    n = len(H)
    scale = max(np.trace(H) / max(n, 1), np.finfo(float).tiny)
    lam = 1e-10 * scale if jitter is None else float(jitter)
    if lam < 0:
        raise ValueError("jitter must be nonnegative")
    cap = max(1e-4 * scale, lam)
    eye = np.eye(n)
    while True:
        try:
            chol = cho_factor(H + lam * eye, lower=True)
            return GramMatrix(H, lam, spec, X, chol)
        except np.linalg.LinAlgError:
            if lam >= cap:
                raise KernelError(f"Cholesky failed even with jitter {lam:.3g}") from None
            lam = min(cap, lam * 10 if lam > 0 else 1e-10 * scale)


def gram(spec: KernelSpec, X, jitter: float | None = None) -> GramMatrix:
    X = np.atleast_2d(np.asarray(X, float))
    _check_unit(X, "training")
    H = kernel_fn(spec, X @ X.T)
    H = (H + H.T) / 2   # the product X X^T can differ from its transpose in the last bit
    return factorize(H, jitter, spec, X)


def fit(g: GramMatrix, y, ridge: float = 0.0) -> np.ndarray:
    """Dual coefficients alpha = (H + (lambda0 + ridge) I)^{-1} y."""
    y = np.asarray(y, float)
    if len(y) != g.n:
        raise ValueError("target length does not match the Gram matrix")
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    return g.solve(y, ridge)


def predict(spec: KernelSpec, X_train, alpha, X_new) -> np.ndarray:
    K = kernel_matrix(spec, X_new, X_train)
    return K @ np.asarray(alpha, float)


def complexity(g: GramMatrix, y) -> float:
    """y^T (H + lambda0 I)^{-1} y."""
    y = np.asarray(y, float)
    return float(y @ g.solve(y))


class KernelRegressor:
    """Minimum-norm (or ridge) kernel regression."""

    def __init__(self, spec: KernelSpec, ridge: float = 0.0, jitter: float | None = None):
        self.spec = spec
        self.ridge = ridge
        self.jitter = jitter

    def fit(self, X, y):
        self.gram_ = gram(self.spec, X, self.jitter)
        self.X_ = self.gram_.X
        self.alpha_ = fit(self.gram_, y, self.ridge)
        return self

    def predict(self, X):
        return predict(self.spec, self.X_, self.alpha_, X)

    def complexity(self, y) -> float:
        return complexity(self.gram_, y)
