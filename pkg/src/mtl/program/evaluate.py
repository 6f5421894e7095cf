"""Exact semantics of decision programs.

Switches, clusters, lookups and banded SQL filters are only defined away
from their margins; everywhere else the evaluator reports the input as
undefined instead of guessing a value.
"""
from __future__ import annotations

import numpy as np

from ..errors import UndefinedRegionError
from . import ast as A

SPHERE_TOL = 1e-6


def evaluate(program, x):
    """Value of ``program`` at a single input vector; raises UndefinedRegionError."""
    x = np.asarray(x, float)
    if x.ndim != 1:
        raise ValueError("evaluate takes a single input vector; use evaluate_many")
    vals, ok, why = _ev(program, x[None, :])
    if not ok[0]:
        raise UndefinedRegionError(why[0] or "input lies in an undefined region")
    v = vals[0]
    return float(v) if np.ndim(v) == 0 else np.asarray(v)


def evaluate_many(program, X):
    """(values, defined mask) for a batch; undefined rows hold NaN."""
    X = np.atleast_2d(np.asarray(X, float))
    vals, ok, _ = _ev(program, X)
    vals = np.array(vals, float)
    vals[~ok] = np.nan
    return vals, ok


def _reasons(n):
    return np.full(n, "", dtype=object)


def _merge_why(why, mask, msg):
    why[mask & (why == "")] = msg


def _on_sphere(X):
    return np.abs(np.linalg.norm(X, axis=1) - 1) <= SPHERE_TOL


def _dot(X, beta):
    beta = np.asarray(beta, float)
    if len(beta) != X.shape[1]:
        raise ValueError(f"direction has dimension {len(beta)}, input has {X.shape[1]}")
    return X @ beta


def _ev(g, X):
    # -> (values (n,) or (n, m), defined mask (n,), reason strings (n,))
    n = len(X)
    ok = np.ones(n, bool)
    why = _reasons(n)
    if isinstance(g, A.Const):
        v = np.asarray(g.value, float)
        return np.broadcast_to(v, (n,) + v.shape).copy(), ok, why
    if isinstance(g, A.Lin):
        return _dot(X, g.beta) + g.offset, ok, why
    if isinstance(g, A.Poly):
        c, cok, cwhy = _ev(g.child, X)
        return np.polynomial.polynomial.polyval(c, g.coeffs), cok, cwhy
    if isinstance(g, (A.Sum, A.Prod)):
        parts = [_ev(ch, X) for ch in g.children]
        acc = parts[0][0]
        for v, _, _ in parts[1:]:
            acc = acc + v if isinstance(g, A.Sum) else _bmul(acc, v)
        for _, pok, pwhy in parts:
            why = np.where(why == "", pwhy, why)
            ok &= pok
        return acc, ok, why
    if isinstance(g, A.Switch):
        t = _dot(X, g.beta) - g.alpha
        left, right = t <= -g.gamma / 2, t >= g.gamma / 2
        lv, lok, lwhy = _ev(g.left, X)
        rv, rok, rwhy = _ev(g.right, X)
        vals = np.where(_col(left, lv), lv, rv)
        ok = (left & lok) | (right & rok)
        why = np.where(left, lwhy, rwhy)
        _merge_why(why, ~(left | right), f"inside switch margin band |beta.x - {g.alpha:g}| < {g.gamma / 2:g}")
        return vals, ok, why
    if isinstance(g, A.Cluster):
        return _ev_cluster(g, X)
    if isinstance(g, A.Lookup):
        return _ev_lookup(g, X)
    if isinstance(g, A.TupleGate):
        parts = [_ev(ch, X) for ch in g.children]
        vals = np.column_stack([p[0].reshape(n, -1) for p in parts])
        for _, pok, pwhy in parts:
            why = np.where(why == "", pwhy, why)
            ok &= pok
        return vals, ok, why
    if isinstance(g, A.Proj):
        v, cok, cwhy = _ev(g.child, X)
        v = v.reshape(n, -1)
        if not 0 <= g.index < v.shape[1]:
            raise ValueError(f"projection index {g.index} out of range for width {v.shape[1]}")
        return v[:, g.index], cok, cwhy
    if isinstance(g, A.Sql):
        return _ev_sql(g, X)
    if isinstance(g, A.Compose):
        u, iok, iwhy = _ev(g.inner, X)
        u = np.nan_to_num(u.reshape(n, -1))
        v, ook, owhy = _ev(g.outer, u)
        return v, iok & ook, np.where(iwhy == "", owhy, iwhy)
    raise TypeError(f"not a program gate: {type(g).__name__}")


def _col(mask, v):
    return mask if np.ndim(v) == 1 else mask[:, None]


def _bmul(a, b):
    if np.ndim(a) == 2 and np.ndim(b) == 1:
        return a * b[:, None]
    if np.ndim(a) == 1 and np.ndim(b) == 2:
        return a[:, None] * b
    return a * b


def _ev_cluster(g: A.Cluster, X):
    n = len(X)
    why = _reasons(n)
    sphere = _on_sphere(X)
    dist = np.stack([np.linalg.norm(X - np.asarray(c), axis=1) for c in g.centers], axis=1)
    inside = dist <= g.r / 3 * (1 + 1e-12)
    which = np.argmax(inside, axis=1)
    hit = inside.any(axis=1)
    vals = None
    ok = sphere & hit
    for i, (c, ch) in enumerate(zip(g.centers, g.children)):
        v, cok, cwhy = _ev(ch, (X - np.asarray(c)) * 3 / g.r)
        if vals is None:
            vals = np.zeros_like(v)
        sel = hit & (which == i)
        vals = np.where(_col(sel, v), v, vals)
        ok &= ~sel | cok
        why = np.where(sel & (why == ""), cwhy, why)
    _merge_why(why, ~sphere, "cluster input is not on the unit sphere")
    _merge_why(why, ~hit, f"input is not within r/3={g.r / 3:g} of any cluster center")
    return vals, ok, why


def _ev_lookup(g: A.Lookup, X):
    n = len(X)
    why = _reasons(n)
    sphere = _on_sphere(X)
    dist = np.stack([np.linalg.norm(X - np.asarray(k), axis=1) for k in g.keys], axis=1)
    inside = dist <= g.r / 3 * (1 + 1e-12)
    far = np.all(dist >= 2 * g.r / 3 * (1 - 1e-12), axis=1)
    V = np.array([np.asarray(v, float) for v in g.values])
    vals = np.zeros((n,) + V.shape[1:])
    hit = inside.any(axis=1)
    vals[hit] = V[np.argmax(inside, axis=1)[hit]]
    ok = sphere & (hit | far)
    _merge_why(why, ~sphere, "lookup input is not on the unit sphere")
    _merge_why(why, ~(hit | far), "input is between r/3 and 2r/3 of a lookup key")
    return vals, ok, why


def sql_matches(g: A.Sql, X):
    """(match matrix (n, rows), defined mask) of the WHERE clauses."""
    n, k = len(X), len(g.rows)
    match = np.ones((n, k), bool)
    ok = np.ones(n, bool)
    R = np.array(g.rows, float).reshape(k, -1) if k else np.zeros((0, 1))
    for w in g.where:
        if w.kind == "ge":
            thr = (_dot(X, w.beta) if len(w.beta) else np.zeros(n)) + w.offset
            t = R[None, :, w.col] - thr[:, None]
            if w.gamma == 0:
                match &= t >= 0
            else:
                yes, no = t >= w.gamma / 2, t <= -w.gamma / 2
                ok &= np.all(yes | no, axis=1)
                match &= yes
        else:
            ok &= _on_sphere(X)
            K = np.array(g.keys, float)
            dist = np.linalg.norm(X[:, None, :] - K[None, :, :], axis=2)
            yes = dist <= w.r / 3 * (1 + 1e-12)
            no = dist >= 2 * w.r / 3 * (1 - 1e-12)
            ok &= np.all(yes | no, axis=1)
            match &= yes
    return match, ok


def _ev_sql(g: A.Sql, X):
    n = len(X)
    why = _reasons(n)
    match, ok = sql_matches(g, X)
    v = np.asarray(g.values, float)
    if g.agg == "sum":
        vals = match @ v
    elif g.agg == "max":
        vals = np.max(np.where(match, v[None, :], -np.inf), axis=1, initial=-np.inf)
        vals[~match.any(axis=1)] = 0.0
    else:
        vals = np.min(np.where(match, v[None, :], np.inf), axis=1, initial=np.inf)
        vals[~match.any(axis=1)] = 0.0
    _merge_why(why, ~ok, "input falls in the band of a SQL filter")
    return vals, ok, why
