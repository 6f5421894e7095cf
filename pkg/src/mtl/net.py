"""Finite-width two-layer networks: random init, top-layer-only and full training.

The forward pass is f(x) = v . act(W z) / sqrt(m), where z is the input after
an optional fixed map: ``bias`` appends a constant, z = (x/sqrt2, 1/sqrt2);
``radius`` scales x to the sphere of radius r (used with the exponential
activation so the random-feature kernel is exp(r^2 (t - 1))).
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DivergenceError, NonFiniteError

MAGIC = b"MTL1"
ACTIVATIONS = ("relu", "exponential")
INPUT_MAPS = ("none", "bias", "radius")


@dataclass
class TwoLayerNet:
    W: np.ndarray
    v: np.ndarray
    activation: str = "relu"
    input_map: str = "none"
    radius: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.input_map not in INPUT_MAPS:
            raise ValueError(f"unknown input map {self.input_map!r}")
        self.W = np.atleast_2d(np.asarray(self.W, float))
        self.v = np.asarray(self.v, float)

    @property
    def width(self) -> int:
        return self.W.shape[0]

    @property
    def in_dim(self) -> int:
        """Dimension of raw inputs (before the input map)."""
        return self.W.shape[1] - (self.input_map == "bias")

    @property
    def out_dim(self) -> int:
        return 1 if self.v.ndim == 1 else self.v.shape[1]

    def copy(self) -> "TwoLayerNet":
        return replace(self, W=self.W.copy(), v=self.v.copy())

    def map_inputs(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if self.input_map == "bias":
            return np.hstack([X, np.ones((len(X), 1))]) / math.sqrt(2)
        if self.input_map == "radius":
            return self.radius * X
        return X

    def preact(self, X) -> np.ndarray:
        return self.map_inputs(X) @ self.W.T

    def act(self, P: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            return np.maximum(P, 0.0)
        shift = self.radius**2 if self.input_map == "radius" else 0.0
        with np.errstate(over="ignore"):
            out = np.exp(P - shift)
        if not np.all(np.isfinite(out)):
            raise NonFiniteError("exponential activation overflowed")
        return out

    def features(self, X) -> np.ndarray:
        """Hidden activations scaled by 1/sqrt(m)."""
        return self.act(self.preact(X)) / math.sqrt(self.width)

    def __call__(self, X):
        return forward(self, X)


def init(seed: int, m: int, d: int, activation: str = "relu", *, mode: str = "top_only",
         input_map: str = "none", radius: float = 1.0, out_dim: int = 1) -> TwoLayerNet:
    """W ~ N(0, 1); v = 0 for top-only training, N(0, 1)/sqrt(m) otherwise."""
    if m < 1 or d < 1:
        raise ValueError("need m >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    d_in = d + (input_map == "bias")
    W = rng.standard_normal((m, d_in))
    shape = (m,) if out_dim == 1 else (m, out_dim)
    if mode == "top_only":
        v = np.zeros(shape)
    else:
        v = rng.standard_normal(shape) / math.sqrt(m)
    return TwoLayerNet(W, v, activation, input_map, radius, seed)


def forward(net: TwoLayerNet, X) -> np.ndarray:
    X = np.asarray(X, float)
    single = X.ndim == 1
    out = net.features(X) @ net.v
    return out[0] if single else out


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    mode: str = "top_only"          # top_only | full
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 32
    loss: str = "squared"           # squared | logistic
    seed: int = 0
    momentum: float = 0.0
    solver: str = "sgd"             # sgd | exact (top_only closed-form least squares)
    ridge: float = 0.0

    def __post_init__(self):
        if self.mode not in ("top_only", "full"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.loss not in ("squared", "logistic"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.solver not in ("sgd", "exact"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.solver == "exact" and (self.mode != "top_only" or self.loss != "squared"):
            raise ValueError("the exact solver needs top_only mode and squared loss")
        if not (self.learning_rate > 0 and self.epochs >= 1 and self.batch_size >= 1):
            raise ValueError("learning rate, epochs and batch size must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")


def _loss_and_grad(out: np.ndarray, y: np.ndarray, kind: str) -> tuple[float, np.ndarray]:
    # mean loss over the batch and d loss / d out
    n = len(out)
    if kind == "squared":
        r = out - y
        return float(0.5 * np.sum(r * r) / n), r / n
    s = 2 * y - 1
    margin = s * out
    loss = np.logaddexp(0.0, -margin)
    with np.errstate(over="ignore"):
        g = -s / (1 + np.exp(margin))
    return float(np.sum(loss) / n), g / n


def evaluate_loss(net: TwoLayerNet, X, y, kind: str = "squared") -> float:
    return _loss_and_grad(forward(net, X), np.asarray(y, float), kind)[0]


def _solve_top(net: TwoLayerNet, X, y, ridge: float, chunk: int = 8192) -> np.ndarray:
    """Least-squares top layer: primal normal equations when n > m, else min-norm dual."""
    n, m = len(X), net.width
    y = np.asarray(y, float)
    if n <= m:
        F = net.features(X)
        K = F @ F.T
        lam = ridge + 1e-10 * np.trace(K) / n
        c = cho_solve(cho_factor(K + lam * np.eye(n), lower=True), y)
        return F.T @ c
    A = np.zeros((m, m))
    b = np.zeros((m,) + y.shape[1:])
    for i in range(0, n, chunk):
        F = net.features(X[i:i + chunk])
        A += F.T @ F
        b += F.T @ y[i:i + chunk]
    lam = ridge + 1e-10 * np.trace(A) / m
    return cho_solve(cho_factor(A + lam * np.eye(m), lower=True), b)


def train(net: TwoLayerNet, X, y, config: TrainConfig = TrainConfig()):
    """Train a copy of ``net``; returns (trained net, per-epoch mean loss list)."""
    X = np.atleast_2d(np.asarray(X, float))
    y = np.asarray(y, float)
    if X.shape[1] != net.in_dim:
        raise ValueError(f"features have {X.shape[1]} columns, net expects {net.in_dim}")
    if len(y) != len(X):
        raise ValueError("X and y lengths differ")
    net = net.copy()
    if config.solver == "exact":
        net.v = _solve_top(net, X, y, config.ridge)
        loss = evaluate_loss(net, X, y)
        if not math.isfinite(loss):
            raise DivergenceError(0, loss)
        return net, [loss]

    rng = np.random.default_rng(config.seed)
    n, m = len(X), net.width
    sq = math.sqrt(m)
    top_only = config.mode == "top_only"
    # frozen hidden layer: activations only need computing once
    Z = net.map_inputs(X)
    F_all = net.features(X) if top_only else None
    vel_v = np.zeros_like(net.v)
    vel_W = np.zeros_like(net.W)
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            yb = y[idx]
            if top_only:
                F = F_all[idx]
                out = F @ net.v
                loss, g = _loss_and_grad(out, yb, config.loss)
                grad_v = F.T @ g
            else:
                P = Z[idx] @ net.W.T
                A = net.act(P)
                F = A / sq
                out = F @ net.v
                loss, g = _loss_and_grad(out, yb, config.loss)
                grad_v = F.T @ g
                # back through v and the activation
                dF = (g[:, None] * net.v[None, :] if g.ndim == 1 else g @ net.v.T) / sq
                dP = dF * ((P > 0) if net.activation == "relu" else A)
                grad_W = dP.T @ Z[idx]
                vel_W = config.momentum * vel_W - config.learning_rate * grad_W
                net.W += vel_W
            vel_v = config.momentum * vel_v - config.learning_rate * grad_v
            net.v += vel_v
            total += loss * len(idx)
        mean = total / n
        if not math.isfinite(mean) or not np.all(np.isfinite(net.v)):
            raise DivergenceError(epoch, mean)
        history.append(mean)
    return net, history


# ---------------------------------------------------------------------------
# serialization


def save(net: TwoLayerNet, path) -> None:
    """MTL1 | u32 header length | JSON shape header | W then v as float64 LE, row-major."""
    header = json.dumps({
        "version": 1, "W_shape": list(net.W.shape), "v_shape": list(net.v.shape),
        "activation": net.activation, "input_map": net.input_map,
        "radius": net.radius, "seed": net.seed,
    }, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(np.ascontiguousarray(net.W, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(net.v, dtype="<f8").tobytes())


def load(path) -> TwoLayerNet:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise ValueError("not an MTL1 network file")
    (hlen,) = struct.unpack("<I", blob[4:8])
    meta = json.loads(blob[8:8 + hlen])
    if meta.get("version") != 1:
        raise ValueError(f"unsupported network file version {meta.get('version')}")
    off = 8 + hlen
    w_n = math.prod(meta["W_shape"])
    v_n = math.prod(meta["v_shape"])
    data = np.frombuffer(blob, dtype="<f8", offset=off)
    if len(data) != w_n + v_n:
        raise ValueError("network file is truncated or has trailing bytes")
    W = data[:w_n].reshape(meta["W_shape"]).astype(float)
    v = data[w_n:].reshape(meta["v_shape"]).astype(float)
    return TwoLayerNet(W, v, meta["activation"], meta["input_map"], meta["radius"], meta["seed"])
