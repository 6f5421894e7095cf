"""Random decision programs and samplers of inputs where they are defined."""
from __future__ import annotations

import numpy as np

from ..errors import GeneratorError
from . import ast as A
from .evaluate import evaluate_many


def unit_sphere(rng, n: int, d: int) -> np.ndarray:
    X = rng.standard_normal((n, d))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def separated_points(rng, k: int, d: int, sep: float, max_tries: int = 1000) -> np.ndarray:
    """k unit vectors with pairwise distance >= sep."""
    for _ in range(max_tries):
        P = unit_sphere(rng, k, d)
        D = np.linalg.norm(P[:, None] - P[None, :], axis=2)
        if k == 1 or D[np.triu_indices(k, 1)].min() >= sep:
            return P
    raise GeneratorError(f"could not place {k} points {sep} apart on the sphere in R^{d}")


def random_program(rng, d: int = 3, depth: int = 3, *, min_margin: float = 0.2,
                   min_sep: float = 0.4, raw: bool = True, _top: bool = True):
    """A random program of at most ``depth`` gate levels.

    Leaves are constants or degree <= 2 polynomials of a linear form. Clusters
    and lookups only appear where the gate input is the raw (unit-norm)
    program input, since their semantics need inputs on the sphere.
    """
    if depth <= 1:
        return _leaf(rng, d)
    kinds = ["switch", "switch", "sum", "prod"] + ([] if _top else ["leaf"])
    if raw:
        kinds += ["cluster", "lookup"]
    kind = kinds[rng.integers(len(kinds))]
    sub = dict(min_margin=min_margin, min_sep=min_sep, _top=False)
    if kind == "leaf":
        return _leaf(rng, d)
    if kind == "switch":
        beta = unit_sphere(rng, 1, d)[0]
        alpha = float(rng.uniform(-0.4, 0.4))
        gamma = float(rng.uniform(min_margin, 2 * min_margin))
        return A.Switch(beta, alpha, gamma, random_program(rng, d, depth - 1, raw=raw, **sub),
                        random_program(rng, d, depth - 1, raw=raw, **sub))
    if kind in ("sum", "prod"):
        cls = A.Sum if kind == "sum" else A.Prod
        return cls((random_program(rng, d, depth - 1, raw=raw, **sub), _leaf(rng, d)))
    r = float(rng.uniform(min_sep, 1.5 * min_sep))
    k = int(rng.integers(2, 4))
    centers = separated_points(rng, k, d, r)
    if kind == "lookup":
        vals = rng.uniform(-1, 1, size=k)
        return A.Lookup(tuple(map(tuple, centers)), tuple(vals), r)
    kids = tuple(random_program(rng, d, depth - 1, raw=False, **sub) for _ in range(k))
    return A.Cluster(tuple(map(tuple, centers)), r, kids)


def _leaf(rng, d):
    if rng.random() < 0.4:
        return A.Const(float(rng.uniform(-1, 1)))
    beta = unit_sphere(rng, 1, d)[0] * rng.uniform(0.5, 1.0)
    deg = int(rng.integers(1, 3))
    coeffs = rng.uniform(-0.5, 0.5, size=deg + 1)
    return A.Poly(tuple(coeffs), A.Lin(beta))


def anchors(program) -> list[tuple[np.ndarray, float]]:
    """(center, radius) pairs of raw-input clusters and lookups, for targeted sampling."""
    out = []

    def walk(g, raw):
        if isinstance(g, A.Cluster) and raw:
            out.extend((np.asarray(c), g.r / 3) for c in g.centers)
            return  # children see rescaled inputs
        if isinstance(g, A.Lookup) and raw:
            out.extend((np.asarray(c), g.r / 3) for c in g.keys)
        if isinstance(g, A.Compose):
            return
        for ch in A.children(g):
            walk(ch, raw)

    walk(program, True)
    return out


def sample_defined(program, n: int, d: int, rng, *, max_rounds: int = 50,
                   batch: int = 4000) -> np.ndarray:
    """n unit-norm inputs at which ``program`` is defined.

    Half the proposals are uniform on the sphere and half land in a random
    cap of radius r/3 around a cluster center or lookup key.
    """
    found = []
    total = 0
    anc = anchors(program)
    for _ in range(max_rounds):
        X = unit_sphere(rng, batch, d)
        if anc:
            m = batch // 2
            idx = rng.integers(len(anc), size=m)
            C = np.array([anc[i][0] for i in idx])
            rad = np.array([anc[i][1] for i in idx])
            step = unit_sphere(rng, m, d) * (rad * rng.uniform(0, 1, size=m) ** (1 / max(d - 1, 1)))[:, None]
            P = C + step
            X[:m] = P / np.linalg.norm(P, axis=1, keepdims=True)
        _, ok = evaluate_many(program, X)
        found.append(X[ok])
        total += int(ok.sum())
        if total >= n:
            break
    if total < n:
        raise GeneratorError(f"only {total} of {n} defined inputs found")
    return np.vstack(found)[:n]
