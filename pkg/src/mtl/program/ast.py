"""Gates of a generalized decision program (a fan-out-1 circuit)."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import ProgramSyntaxError

UNIT_TOL = 1e-9
AGGS = ("sum", "max", "min")


def _vec(v) -> tuple[float, ...]:
    return tuple(float(a) for a in np.atleast_1d(np.asarray(v, dtype=float)))


def _norm(v) -> float:
    return float(np.linalg.norm(v))


@dataclass(frozen=True)
class Const:
    value: Union[float, tuple]

    def __post_init__(self):
        v = self.value
        object.__setattr__(self, "value", float(v) if np.ndim(v) == 0 else _vec(v))


@dataclass(frozen=True)
class Lin:
    """beta . x + offset."""
    beta: tuple
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta", _vec(self.beta))
        object.__setattr__(self, "offset", float(self.offset))


@dataclass(frozen=True)
class Poly:
    """sum_k coeffs[k] * child**k for a scalar child."""
    coeffs: tuple
    child: "Gate"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _vec(self.coeffs))


@dataclass(frozen=True)
class Sum:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ProgramSyntaxError("sum needs at least one child")


@dataclass(frozen=True)
class Prod:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ProgramSyntaxError("prod needs at least one child")


@dataclass(frozen=True)
class Switch:
    """left if beta . x - alpha <= -gamma/2, right if >= gamma/2."""
    beta: tuple
    alpha: float
    gamma: float
    left: "Gate"
    right: "Gate"

    def __post_init__(self):
        object.__setattr__(self, "beta", _vec(self.beta))
        if abs(_norm(self.beta) - 1) > UNIT_TOL:
            raise ProgramSyntaxError(f"switch direction must be a unit vector (norm {_norm(self.beta):.6g})")
        if not abs(self.alpha) < 1:
            raise ProgramSyntaxError("switch threshold must satisfy |alpha| < 1")
        if not 0 < self.gamma <= 1:
            raise ProgramSyntaxError("switch margin must lie in (0, 1]")


@dataclass(frozen=True)
class Cluster:
    """Child i, applied to (x - c_i)/(r/3), when ||x - c_i|| <= r/3."""
    centers: tuple
    r: float
    children: tuple

    def __post_init__(self):
        cs = tuple(_vec(c) for c in self.centers)
        object.__setattr__(self, "centers", cs)
        object.__setattr__(self, "children", tuple(self.children))
        if len(cs) != len(self.children) or not cs:
            raise ProgramSyntaxError("cluster needs one child per center")
        _check_centers(cs, self.r)


@dataclass(frozen=True)
class Lookup:
    """v_i within r/3 of key i, 0 at distance >= 2r/3 from every key."""
    keys: tuple
    values: tuple
    r: float | None = None

    def __post_init__(self):
        ks = tuple(_vec(k) for k in self.keys)
        vals = tuple(float(v) if np.ndim(v) == 0 else _vec(v) for v in self.values)
        if len(ks) != len(vals) or not ks:
            raise ProgramSyntaxError("lookup needs one value per key")
        if len({np.ndim(v) == 0 and 1 or len(v) for v in vals}) > 1:
            raise ProgramSyntaxError("lookup values must all have the same shape")
        for v in vals:
            if np.sum(np.abs(v)) > 1 + 1e-12:
                raise ProgramSyntaxError("lookup values must have l1 norm at most 1")
        r = self.r
        if r is None:
            r = min((_norm(np.subtract(a, b)) for a, b in _pairs(ks)), default=1.0)
        object.__setattr__(self, "keys", ks)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "r", float(r))
        _check_centers(ks, self.r)


@dataclass(frozen=True)
class TupleGate:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if not self.children:
            raise ProgramSyntaxError("tuple needs at least one child")


@dataclass(frozen=True)
class Proj:
    index: int
    child: "Gate"


@dataclass(frozen=True)
class Where:
    """Row filter.

    ``ge``: row[col] >= beta . x + offset; gamma > 0 leaves a band of width
    gamma around equality where the filter is undefined. An empty beta is the
    zero vector. ``match``: x within r/3 of the row's key (distinct keys at
    least r apart), no match at distance >= 2r/3.
    """
    kind: str = "ge"
    col: int = 0
    beta: tuple = ()
    offset: float = 0.0
    gamma: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        if self.kind not in ("ge", "match"):
            raise ProgramSyntaxError(f"unknown where clause {self.kind!r}")
        object.__setattr__(self, "beta", _vec(self.beta) if len(self.beta) else ())
        object.__setattr__(self, "offset", float(self.offset))
        if self.gamma < 0:
            raise ProgramSyntaxError("where margin must be nonnegative")
        if self.kind == "match" and not self.r > 0:
            raise ProgramSyntaxError("match clause needs a positive separation r")


@dataclass(frozen=True)
class Sql:
    """SELECT agg(values[i]) FROM rows WHERE all clauses hold."""
    rows: tuple
    values: tuple
    where: tuple
    agg: str = "sum"
    keys: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(_vec(r) for r in self.rows))
        object.__setattr__(self, "values", _vec(self.values))
        object.__setattr__(self, "where", tuple(self.where))
        object.__setattr__(self, "keys", tuple(_vec(k) for k in self.keys))
        if self.agg not in AGGS:
            raise ProgramSyntaxError(f"unknown aggregator {self.agg!r}")
        if len(self.rows) != len(self.values):
            raise ProgramSyntaxError("sql needs one value per row")
        if self.agg in ("max", "min") and any(not 0 <= v <= 1 for v in self.values):
            raise ProgramSyntaxError("max/min aggregation needs values in [0, 1]")
        for w in self.where:
            if w.kind == "match":
                if len(self.keys) != len(self.rows):
                    raise ProgramSyntaxError("match clause needs one key per row")
                _check_centers(_distinct(self.keys), w.r)
            elif self.rows and not 0 <= w.col < len(self.rows[0]):
                raise ProgramSyntaxError(f"where column {w.col} out of range")


@dataclass(frozen=True)
class Compose:
    """outer applied to the output of inner."""
    outer: "Gate"
    inner: "Gate"


Gate = Union[Const, Lin, Poly, Sum, Prod, Switch, Cluster, Lookup, TupleGate, Proj, Sql, Compose]


def _pairs(items):
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            yield items[i], items[j]


def _distinct(keys):
    out = []
    for k in keys:
        if not any(np.allclose(k, o) for o in out):
            out.append(k)
    return tuple(out)


def _check_centers(cs, r):
    if not r > 0:
        raise ProgramSyntaxError("separation r must be positive")
    for c in cs:
        if _norm(c) > 1 + UNIT_TOL:
            raise ProgramSyntaxError("centers must lie in the unit ball")
    for a, b in _pairs(cs):
        if _norm(np.subtract(a, b)) < r * (1 - 1e-12):
            raise ProgramSyntaxError(f"centers closer than separation r={r}")


def children(g) -> tuple:
    if isinstance(g, (Sum, Prod, TupleGate, Cluster)):
        return g.children
    if isinstance(g, (Poly, Proj)):
        return (g.child,)
    if isinstance(g, Switch):
        return (g.left, g.right)
    if isinstance(g, Compose):
        return (g.outer, g.inner)
    return ()


def depth(g) -> int:
    """Gate levels; an analytic function of a linear form counts as one level."""
    if isinstance(g, Poly) and isinstance(g.child, (Lin, Const)):
        return 1
    ch = children(g)
    return 1 + max((depth(c) for c in ch), default=0)


def hash_key(key: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic pseudo-random unit vector for a string key."""
    digest = hashlib.sha256(f"{seed}:{key}".encode()).digest()
    rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def hash_dim(k: int, d: int = 1) -> int:
    """max(d, ceil(10 ln k)): enough room for k hashed keys to be well separated."""
    return max(d, math.ceil(10 * math.log(k)) if k > 1 else 1)
