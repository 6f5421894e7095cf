"""Deterministic dataset generators for the multi-task experiments.

Every generator is a pure function of its arguments: all randomness comes from
``np.random.default_rng(seed)``.
"""
from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import GeneratorError

log = logging.getLogger(__name__)

AGGREGATORS = ("sum", "max", "min")


@dataclass(eq=False)
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict)
    train_idx: np.ndarray | None = None
    test_idx: np.ndarray | None = None

    def __post_init__(self):
        self.X = np.atleast_2d(np.asarray(self.X, float))
        self.y = np.asarray(self.y, float)
        if len(self.X) != len(self.y):
            raise ValueError("X and y must have the same number of rows")

    @property
    def n(self) -> int:
        return len(self.X)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def with_split(self, test_frac: float = 0.2, seed: int = 0,
                   n_test: int | None = None) -> "LabeledDataset":
        """Random disjoint train/test split covering every row."""
        rng = np.random.default_rng(seed)
        perm = rng.permutation(self.n)
        nt = int(round(test_frac * self.n)) if n_test is None else int(n_test)
        if not 0 < nt < self.n:
            raise ValueError("split must leave both parts nonempty")
        return replace(self, test_idx=np.sort(perm[:nt]), train_idx=np.sort(perm[nt:]))

    def train(self):
        return self.X[self.train_idx], self.y[self.train_idx]

    def test(self):
        return self.X[self.test_idx], self.y[self.test_idx]

    def to_csv(self, path) -> None:
        path = Path(path)
        y2 = self.y.reshape(self.n, -1)
        ycols = ["y"] if y2.shape[1] == 1 else [f"y{j}" for j in range(y2.shape[1])]
        header = [f"f{i}" for i in range(self.d)] + ycols
        np.savetxt(path, np.hstack([self.X, y2]), delimiter=",", fmt="%.17g",
                   header=",".join(header), comments="")
        meta = dict(self.meta)
        if self.train_idx is not None:
            meta["split"] = {"train": self.train_idx.tolist(), "test": self.test_idx.tolist()}
        meta_path(path).write_text(json.dumps(_jsonable(meta), indent=1, sort_keys=True))

    @classmethod
    def from_csv(cls, path) -> "LabeledDataset":
        path = Path(path)
        with open(path) as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        ycols = [i for i, h in enumerate(header) if h.startswith("y")]
        if not ycols:
            raise ValueError("dataset CSV has no y column")
        X = data[:, [i for i in range(len(header)) if i not in ycols]]
        y = data[:, ycols[0]] if len(ycols) == 1 else data[:, ycols]
        meta, tr, te = {}, None, None
        mp = meta_path(path)
        if mp.exists():
            meta = json.loads(mp.read_text())
            split = meta.pop("split", None)
            if split:
                tr, te = np.array(split["train"], int), np.array(split["test"], int)
        return cls(X, y, meta, tr, te)


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# normalization


def normalize(ds: LabeledDataset, append_constant: bool = True, constant: float = 1.0,
              prescale: bool = True) -> LabeledDataset:
    """Map rows to the unit sphere.

    Rows are first divided by the largest row norm (if ``prescale``), then a
    constant coordinate is appended so the map stays injective, then each row
    is scaled to unit norm. Applying it to an already normalized dataset is a
    no-op.
    """
    if ds.meta.get("normalized"):
        return ds
    X = ds.X.copy()
    scale = 1.0
    if prescale:
        scale = float(np.max(np.linalg.norm(X, axis=1)))
        if scale > 0:
            X = X / scale
    if append_constant:
        X = np.hstack([X, np.full((len(X), 1), constant)])
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise GeneratorError("cannot normalize an all-zero row")
    meta = dict(ds.meta, normalized=True, prescale=scale,
                appended_constant=constant if append_constant else None)
    return replace(ds, X=X / norms[:, None], meta=meta)


def unit_rows(X) -> np.ndarray:
    X = np.asarray(X, float)
    return X / np.linalg.norm(X, axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# clusters


def gen_clusters(k: int, d: int, n_per_cluster: int, label_mode: str = "linear", *,
                 teacher_width: int = 10, sigma: float = 0.025, separation: float = 6.0,
                 seed: int = 0, max_tries: int = 2000) -> LabeledDataset:
    """Task codes as well-separated clusters with a per-cluster binary task.

    Centers lie on the unit sphere with pairwise distance at least
    ``separation`` times the cluster's RMS radius sigma*sqrt(d). In linear mode
    each cluster is a pair of Gaussians at c +- 3 sigma u labelled by side; in
    teacher mode a single Gaussian is labelled by the sign of a random
    one-hidden-layer ReLU net, centred to make both labels likely.
    """
    if k < 1 or d < 1 or n_per_cluster < 1:
        raise GeneratorError("need k, d, n_per_cluster >= 1")
    if label_mode not in ("linear", "teacher"):
        raise GeneratorError(f"unknown label mode {label_mode!r}")
    rng = np.random.default_rng(seed)
    min_dist = separation * sigma * math.sqrt(d)
    centers = []
    tries = 0
    while len(centers) < k:
        c = unit_rows(rng.standard_normal(d))
        if all(np.linalg.norm(c - o) >= min_dist for o in centers):
            centers.append(c)
        tries += 1
        if tries > max_tries:
            raise GeneratorError(f"could not place {k} centers {min_dist:.3g} apart in d={d}")
    centers = np.array(centers)

    Xs, ys, cid = [], [], []
    teachers = []
    for j, c in enumerate(centers):
        noise = sigma * rng.standard_normal((n_per_cluster, d))
        if label_mode == "linear":
            u = unit_rows(rng.standard_normal(d))
            lab = (rng.random(n_per_cluster) < 0.5).astype(float)
            X = c + (2 * lab - 1)[:, None] * (3 * sigma) * u + noise
        else:
            B = rng.standard_normal((teacher_width, d))
            a = rng.standard_normal(teacher_width)
            probe = np.maximum(rng.standard_normal((512, d)) @ B.T, 0) @ a
            bias = -float(np.median(probe))
            X = c + noise
            out = np.maximum((noise / sigma) @ B.T, 0) @ a + bias
            lab = (out > 0).astype(float)
            teachers.append({"B": B, "a": a, "bias": bias})
        Xs.append(X)
        ys.append(lab)
        cid.append(np.full(n_per_cluster, j))
    meta = {"generator": "clusters", "k": k, "d": d, "n_per_cluster": n_per_cluster,
            "label_mode": label_mode, "sigma": sigma, "separation": separation,
            "seed": seed, "centers": centers, "cluster": np.concatenate(cid)}
    return LabeledDataset(np.vstack(Xs), np.concatenate(ys), meta)


# ---------------------------------------------------------------------------
# decision trees


def tree_route(x, thresholds) -> int:
    """Leaf index: bit i is 1 (go right) iff x_i > t_i; the first split is the top bit."""
    bits = [int(x[i] > t) for i, t in enumerate(thresholds)]
    return int("".join(map(str, bits)), 2) if bits else 0


def margin_ok(x, thresholds, gamma: float) -> bool:
    return all(abs(x[i] - t) >= gamma / 2 for i, t in enumerate(thresholds))


def homogeneous_monomials(k_vars: int, p: int) -> list[tuple[int, ...]]:
    """Exponent tuples of all degree-p monomials in k_vars variables."""
    out = []
    for combo in itertools.combinations_with_replacement(range(k_vars), p):
        e = [0] * k_vars
        for i in combo:
            e[i] += 1
        out.append(tuple(e))
    return out


def eval_homogeneous(Z, exps, coeffs) -> np.ndarray:
    Z = np.atleast_2d(Z)
    E = np.asarray(exps)
    return np.prod(Z[:, None, :] ** E[None, :, :], axis=2) @ np.asarray(coeffs)


def admissible_threshold_range(gamma: float) -> tuple[float, float]:
    return gamma / 2, 1 - gamma / 2


def gen_tree_task(h: int, gamma: float, k_vars: int, p: int, n_per_leaf: int, *,
                  seed: int = 0, thresholds=None) -> LabeledDataset:
    """Polynomials on the leaves of a depth-h threshold tree with margin gamma.

    Thresholds default to uniform draws from the interval that leaves room
    for the margin on both sides. Samples are generated leaf by leaf, drawing
    each routing coordinate uniformly from the part of its side lying outside
    the margin band; this is the same law as rejection sampling from [0, 1].
    """
    if h < 1:
        raise GeneratorError("depth h must be >= 1")
    if not 0 <= gamma < 1:
        raise GeneratorError("gamma must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    lo, hi = admissible_threshold_range(gamma)
    if thresholds is None:
        thresholds = rng.uniform(lo, hi, size=h)
    thresholds = np.asarray(thresholds, float)
    if len(thresholds) != h:
        raise GeneratorError("need one threshold per level")
    if np.any(thresholds <= lo) or np.any(thresholds >= hi):
        raise GeneratorError(f"thresholds must lie strictly inside ({lo:g}, {hi:g}) for margin {gamma:g}")
    exps = homogeneous_monomials(k_vars, p)
    coeffs = rng.uniform(0, 1, size=(2**h, len(exps)))
    Xs, ys, leaves = [], [], []
    for leaf in range(2**h):
        bits = [(leaf >> (h - 1 - i)) & 1 for i in range(h)]
        route = np.empty((n_per_leaf, h))
        for i, b in enumerate(bits):
            t = thresholds[i]
            a, c = (0.0, t - gamma / 2) if b == 0 else (t + gamma / 2, 1.0)
            route[:, i] = rng.uniform(a, c, size=n_per_leaf)
        Z = rng.uniform(0, 1, size=(n_per_leaf, k_vars))
        Xs.append(np.hstack([route, Z]))
        ys.append(eval_homogeneous(Z, exps, coeffs[leaf]))
        leaves.append(np.full(n_per_leaf, leaf))
    meta = {"generator": "tree", "h": h, "gamma": gamma, "k_vars": k_vars, "p": p,
            "n_per_leaf": n_per_leaf, "seed": seed, "thresholds": thresholds,
            "leaf": np.concatenate(leaves), "leaf_coeffs": coeffs}
    return LabeledDataset(np.vstack(Xs), np.concatenate(ys), meta)


# ---------------------------------------------------------------------------
# SQL aggregation


@dataclass(eq=False)
class DataTable:
    columns: list[str]
    values: np.ndarray

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, float))
        if self.values.shape[1] != len(self.columns):
            raise ValueError("column names do not match the value matrix")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("table entries must be finite")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def col(self, name_or_idx) -> int:
        return self.columns.index(name_or_idx) if isinstance(name_or_idx, str) else int(name_or_idx)


def load_table(path) -> DataTable:
    """Numeric columns of a CSV with a header row; other columns are dropped with a warning.

    Rows with an empty or non-numeric cell in a kept column are skipped.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise GeneratorError(f"cannot read table {path}: {e}") from e
    if len(rows) < 2:
        raise GeneratorError("table needs a header and at least one row")
    header, body = rows[0], rows[1:]

    def num(s):
        try:
            return float(s)
        except ValueError:
            return math.nan

    cells = np.array([[num(c) for c in r] for r in body if len(r) == len(header)])
    keep = [j for j in range(len(header)) if np.isfinite(cells[:, j]).mean() >= 0.5]
    dropped = [header[j] for j in range(len(header)) if j not in keep]
    if dropped:
        log.warning("dropping non-numeric columns: %s", ", ".join(dropped))
    vals = cells[:, keep]
    vals = vals[np.all(np.isfinite(vals), axis=1)]
    if len(vals) == 0:
        raise GeneratorError("no complete numeric rows in table")
    return DataTable([header[j] for j in keep], vals)


def synthetic_table(n_rows: int = 11830, n_cols: int = 10, *, correlation: float = 0.5,
                    seed: int = 0) -> DataTable:
    """Economic-style table: log-normal columns sharing one latent factor.

    The last column is named ``pl_x`` and serves as the default aggregation target.
    """
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((n_rows, 1))
    load = math.sqrt(correlation)
    Z = load * f + math.sqrt(1 - correlation) * rng.standard_normal((n_rows, n_cols))
    mu = rng.uniform(-1, 3, size=n_cols)
    sd = rng.uniform(0.3, 1.2, size=n_cols)
    vals = np.exp(mu + sd * Z)
    names = [f"c{j}" for j in range(n_cols - 1)] + ["pl_x"]
    return DataTable(names, vals)


def sql_aggregate(values: np.ndarray, agg: str) -> float:
    if agg == "sum":
        return float(np.sum(values))
    if len(values) == 0:
        return 0.0
    return float(np.max(values) if agg == "max" else np.min(values))


def sql_match(table: DataTable, cols, thresholds) -> np.ndarray:
    """Row mask of WHERE (col_1 >= t_1) AND ... AND (col_k >= t_k)."""
    mask = np.ones(table.n_rows, bool)
    for c, t in zip(cols, thresholds):
        mask &= table.values[:, c] >= t
    return mask


def gen_sql_task(table: DataTable, k_cols: int, target_col="pl_x", n: int = 1000, *,
                 seed: int = 0, aggregators=AGGREGATORS, max_resample: int = 10000) -> LabeledDataset:
    """Random SELECT agg(target) WHERE conjunctions of k_cols column thresholds.

    Features: multi-hot selected columns, then per column the threshold's
    empirical quantile (0 for unselected columns), then one-hot aggregator.
    Thresholds are values of randomly chosen rows. Queries matching no rows
    are redrawn.
    """
    if table.n_rows == 0:
        raise GeneratorError("empty table")
    tgt = table.col(target_col)
    where_cols = [j for j in range(table.n_cols) if j != tgt]
    if len(where_cols) < k_cols:
        raise GeneratorError(f"table has {len(where_cols)} filterable columns, need {k_cols}")
    rng = np.random.default_rng(seed)
    sorted_cols = {j: np.sort(table.values[:, j]) for j in where_cols}
    nc, na = table.n_cols, len(aggregators)
    X = np.zeros((n, 2 * nc + na))
    y = np.zeros(n)
    matches = np.zeros(n, int)
    queries = []
    for q in range(n):
        for _ in range(max_resample):
            cols = np.sort(rng.choice(where_cols, size=k_cols, replace=False))
            rows = rng.integers(0, table.n_rows, size=k_cols)
            thr = table.values[rows, cols]
            mask = sql_match(table, cols, thr)
            if mask.any():
                break
        else:
            raise GeneratorError("could not draw a query with a nonempty match set")
        a = int(rng.integers(na))
        agg = aggregators[a]
        y[q] = sql_aggregate(table.values[mask, tgt], agg)
        matches[q] = int(mask.sum())
        X[q, cols] = 1.0
        X[q, nc + cols] = [np.searchsorted(sorted_cols[c], t, side="left") / table.n_rows
                           for c, t in zip(cols, thr)]
        X[q, 2 * nc + a] = 1.0
        queries.append({"cols": cols.tolist(), "thresholds": thr.tolist(), "agg": agg})
    meta = {"generator": "sql", "k_cols": k_cols, "target_col": table.columns[tgt], "n": n,
            "seed": seed, "aggregators": list(aggregators), "features_include_aggregator": True,
            "queries": queries, "match_count": matches, "n_rows": table.n_rows}
    return LabeledDataset(X, y, meta)


# ---------------------------------------------------------------------------
# gravity


def gravity_force_x(pos: np.ndarray, mass: np.ndarray) -> np.ndarray:
    """x-component of the force on body 0 from bodies 1..k (unit constant).

    pos: (..., k+1, 3); mass: (..., k+1).
    """
    diff = pos[..., 1:, :] - pos[..., :1, :]
    dist = np.linalg.norm(diff, axis=-1)
    return np.sum(mass[..., :1] * mass[..., 1:] * diff[..., 0] / dist**3, axis=-1)


def gen_gravity(k: int, n: int, *, seed: int = 0, r_min: float = 0.1, box=(0.0, 1.0),
                mass_range=(0.0, 10.0)) -> LabeledDataset:
    """Target body plus k others in a cube; label is the x-force on the target.

    Each row lists (x, y, z, mass) for the target and then every other body.
    Bodies closer than r_min to the target are redrawn.
    """
    if k < 1 or n < 1:
        raise GeneratorError("need k >= 1 and n >= 1")
    rng = np.random.default_rng(seed)
    lo, hi = box
    pos = rng.uniform(lo, hi, size=(n, k + 1, 3))
    while True:
        d = np.linalg.norm(pos[:, 1:] - pos[:, :1], axis=-1)
        bad = np.argwhere(d < r_min)
        if len(bad) == 0:
            break
        pos[bad[:, 0], bad[:, 1] + 1] = rng.uniform(lo, hi, size=(len(bad), 3))
    mass = rng.uniform(*mass_range, size=(n, k + 1))
    X = np.concatenate([pos, mass[..., None]], axis=-1).reshape(n, 4 * (k + 1))
    y = gravity_force_x(pos, mass)
    meta = {"generator": "gravity", "k": k, "n": n, "seed": seed, "r_min": r_min,
            "box": list(box), "mass_range": list(mass_range)}
    return LabeledDataset(X, y, meta)


def gravity_unpack(X) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(X)
    body = X.reshape(len(X), -1, 4)
    return body[..., :3], body[..., 3]


# ---------------------------------------------------------------------------
# parity with noise


def gen_parity_noise(d: int, s: int, n: int, *, seed: int = 0, flip: float = 0.1) -> LabeledDataset:
    """Uniform bits with label <a, x> mod 2 flipped with probability ``flip``."""
    if not 1 <= s <= d:
        raise GeneratorError("need 1 <= s <= d")
    rng = np.random.default_rng(seed)
    support = np.sort(rng.choice(d, size=s, replace=False))
    X = rng.integers(0, 2, size=(n, d)).astype(float)
    clean = X[:, support].sum(axis=1) % 2
    noise = (rng.random(n) < flip).astype(float)
    y = (clean + noise) % 2
    meta = {"generator": "parity", "d": d, "s": s, "n": n, "seed": seed, "flip": flip,
            "support": support, "noise_rate": float(noise.mean())}
    return LabeledDataset(X, y, meta)
