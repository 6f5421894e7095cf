"""One trial of each experiment: generate, split, fit, score.

Every experiment function takes (params, models, seed) and returns rows
{"series", "x", "metric", "value"}. Nothing here reads global state, so a
trial's rows depend only on its config and seed.
"""
from __future__ import annotations

import numpy as np

from .. import kernels as K
from .. import net as N
from .. import taskgen as T
from ..bounds import kernel_series_bound
from .metrics import accuracy, normalized_rmse, r_squared

LOO_GRID = np.logspace(-6, 2, 17)


# ---------------------------------------------------------------------------
# models


def _net_predict(m: dict, Xtr, ytr, Xtests, seed: int):
    mu, sd = (float(ytr.mean()), float(ytr.std())) if m.get("standardize") else (0.0, 1.0)
    sd = sd or 1.0
    mode = m.get("mode", "top_only")
    net = N.init(seed, int(m["width"]), Xtr.shape[1], m.get("activation", "relu"), mode=mode,
                 input_map=m.get("input_map", "none"), radius=float(m.get("radius", 1.0)))
    cfg = N.TrainConfig(mode=mode, solver=m.get("solver", "sgd"),
                        learning_rate=float(m.get("learning_rate", 0.1)),
                        epochs=int(m.get("epochs", 100)), batch_size=int(m.get("batch_size", 32)),
                        momentum=float(m.get("momentum", 0.0)), ridge=float(m.get("ridge", 0.0)),
                        seed=seed)
    net, _ = N.train(net, Xtr, (ytr - mu) / sd, cfg)
    return [net(X) * sd + mu for X in Xtests]


def _spec(m: dict) -> K.KernelSpec:
    return K.KernelSpec(m.get("family", "relu_bias_ntk"), r=float(m.get("r", 1.0)),
                        s=float(m.get("s", 2.0)), D=int(m.get("D", 20)))


def loo_ridge_fit(H: np.ndarray, y: np.ndarray, grid=LOO_GRID):
    """Dual coefficients with the ridge (grid times mean eigenvalue) minimizing leave-one-out error."""
    w, V = np.linalg.eigh(H)
    Vy = V.T @ y
    best = None
    for lam in grid * np.mean(w):
        alpha = V @ (Vy / (w + lam))
        hat = np.einsum("ij,j,ij->i", V, w / (w + lam), V)
        loo = np.mean(((y - H @ alpha) / (1 - hat)) ** 2)
        if best is None or loo < best[0]:
            best = (loo, alpha, float(lam))
    return best[1], best[2]


def _kernel_predict(m: dict, Xtr, ytr, Xtests, seed: int):
    spec = _spec(m)
    if m.get("ridge", 0.0) == "loo":
        alpha, _ = loo_ridge_fit(K.kernel_matrix(spec, Xtr), ytr)
        return [K.predict(spec, Xtr, alpha, X) for X in Xtests]
    reg = K.KernelRegressor(spec, ridge=float(m.get("ridge", 0.0))).fit(Xtr, ytr)
    return [reg.predict(X) for X in Xtests]


def fit_predict(m: dict, Xtr, ytr, Xtests, seed: int) -> list[np.ndarray]:
    """Fit model ``m`` on (Xtr, ytr) and predict each array in Xtests."""
    fn = _net_predict if m["kind"] == "net" else _kernel_predict
    return fn(m, np.asarray(Xtr, float), np.asarray(ytr, float), Xtests, seed)


def _row(series, x, metric, value):
    return {"series": series, "x": x, "metric": metric, "value": float(value)}


# ---------------------------------------------------------------------------
# experiments


def clusters(p, models, seed):
    rows = []
    for k in p["k_values"]:
        ds = T.normalize(T.gen_clusters(int(k), p["d"], p["n_per_cluster"], p["label_mode"],
                                        sigma=p["sigma"], seed=seed))
        ds = ds.with_split(p["test_frac"], seed=seed)
        (Xtr, ytr), (Xte, yte) = ds.train(), ds.test()
        for name, m in models.items():
            (pred,) = fit_predict(m, Xtr, ytr, [Xte], seed)
            rows.append(_row(name, k, "accuracy", accuracy(yte, pred)))
    return rows


def tree(p, models, seed):
    rows = []
    for g in p["gammas"]:
        ds = T.normalize(T.gen_tree_task(p["h"], float(g), p["k_vars"], p["p"], p["n_per_leaf"],
                                         seed=seed))
        ds = ds.with_split(p["test_frac"], seed=seed)
        (Xtr, ytr), (Xte, yte) = ds.train(), ds.test()
        for name, m in models.items():
            (pred,) = fit_predict(m, Xtr, ytr, [Xte], seed)
            rows.append(_row(name, g, "r2", r_squared(yte, pred)))
    return rows


def sql(p, models, seed):
    # one fixed database for every trial; only the queries vary
    table = T.load_table(p["table"]) if p["table"] else \
        T.synthetic_table(p["n_rows"], p["n_cols"], seed=0)
    rows = []
    for kc in p["widths"]:
        ds = T.gen_sql_task(table, int(kc), p["target"], n=p["n_train"] + p["n_test"],
                            seed=1000 * seed + int(kc))
        ds = T.normalize(ds).with_split(seed=seed, n_test=p["n_test"])
        (Xtr, ytr), (Xte, yte) = ds.train(), ds.test()
        for name, m in models.items():
            (pred,) = fit_predict(m, Xtr, ytr, [Xte], seed)
            rows.append(_row(name, kc, "r2", r_squared(yte, pred)))
    return rows


def power_target(n: int, d: int, degree: int, seed: int) -> T.LabeledDataset:
    """(beta . x)^degree on uniform unit-sphere inputs."""
    rng = np.random.default_rng(seed)
    X = T.unit_rows(rng.standard_normal((n, d)))
    beta = T.unit_rows(rng.standard_normal(d))
    return T.LabeledDataset(X, (X @ beta) ** degree, {"generator": "power", "degree": degree})


def gravity(p, models, seed):
    rows = []
    for k in p["k_values"]:
        ds = T.normalize(T.gen_gravity(int(k), p["n"], seed=seed))
        ds = ds.with_split(p["test_frac"], seed=seed)
        (Xtr, ytr), (Xte, yte) = ds.train(), ds.test()
        for name, m in models.items():
            (pred,) = fit_predict(m, Xtr, ytr, [Xte], seed)
            rows.append(_row(f"gravity/{name}", k, "nrmse", normalized_rmse(yte, pred)))
    pt = p.get("power_target")
    if pt:
        deg = int(pt["degree"])
        ds = power_target(p["n"], int(pt["d"]), deg, seed).with_split(p["test_frac"], seed=seed)
        (Xtr, ytr), (Xte, yte) = ds.train(), ds.test()
        for name, m in models.items():
            (pred,) = fit_predict(m, Xtr, ytr, [Xte], seed)
            rows.append(_row(f"power/{name}", deg, "nrmse", normalized_rmse(yte, pred)))
    return rows


def _scaling_data(target: str, p: dict, n_total: int, seed: int):
    if target == "analytic":
        a = p["analytic"]
        ds = power_target(n_total, a["d"], a["degree"], seed)
        return ds.X, ds.y
    t = p["tree"]
    per_leaf = n_total // 2 ** t["h"] + 1
    ds = T.normalize(T.gen_tree_task(t["h"], t["gamma"], t["k_vars"], t["p"], per_leaf, seed=seed))
    perm = np.random.default_rng(seed + 99).permutation(ds.n)
    return ds.X[perm], ds.y[perm]


def scaling(p, models, seed):
    """Test error against training-set size with label noise; error is RMSE / std on clean test labels."""
    rows = []
    nt = p["n_test"]
    for target in p["targets"]:
        for n in p["ns"]:
            X, y = _scaling_data(target, p, n + nt, seed)
            noisy = y + p["noise"] * np.std(y) * np.random.default_rng(seed + 7).standard_normal(len(y))
            Xte, yte = X[n:n + nt], y[n:n + nt]
            for name, m in models.items():
                (pred,) = fit_predict(m, X[:n], noisy[:n], [Xte], seed)
                err = np.sqrt(np.mean((pred - yte) ** 2)) / np.std(yte)
                series = target if len(models) == 1 else f"{target}/{name}"
                rows.append(_row(series, n, "error", err))
    return rows


def pinv_complexity(H: np.ndarray, y: np.ndarray, rtol: float = 1e-10) -> float:
    """y^T H^+ y with eigenvalues below rtol * max dropped."""
    w, V = np.linalg.eigh(H)
    keep = w > rtol * w.max()
    z = V[:, keep].T @ y
    return float(np.sum(z**2 / w[keep]))


def complexity_probe(p, models, seed):
    """sqrt(y^T H^+ y) for (beta . x)^k against the kernel-series bound with numeric b_k."""
    rng = np.random.default_rng(seed)
    X = T.unit_rows(rng.standard_normal((p["n"], p["d"])))
    beta = T.unit_rows(rng.standard_normal(p["d"]))
    rows = []
    kmax = max(p["degrees"])
    for name, m in models.items():
        spec = _spec(m)
        H = K.kernel_matrix(spec, X)
        b = K.kernel_coeffs(spec, kmax)
        for k in p["degrees"]:
            y = (X @ beta) ** k
            a = [0.0] * k + [1.0]
            rows.append(_row(name, k, "sqrt_complexity", np.sqrt(pinv_complexity(H, y))))
            rows.append(_row(name, k, "series_bound",
                             kernel_series_bound(a, [beta] * (k + 1), b).sqrt_M))
    return rows


def parity_control(p, models, seed):
    ds = T.normalize(T.gen_parity_noise(p["d"], p["s"], p["n"], seed=seed, flip=p["flip"]))
    ds = ds.with_split(p["test_frac"], seed=seed)
    (Xtr, ytr), (Xte, yte) = ds.train(), ds.test()
    rows = []
    for name, m in models.items():
        (pred,) = fit_predict(m, Xtr, ytr, [Xte], seed)
        rows.append(_row(name, p["s"], "accuracy", accuracy(yte, pred)))
    return rows


EXPERIMENT_FNS = {"clusters": clusters, "tree": tree, "sql": sql, "gravity": gravity,
                  "scaling": scaling, "complexity_probe": complexity_probe,
                  "parity_control": parity_control}
