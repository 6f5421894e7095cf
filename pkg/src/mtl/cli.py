"""Command line: mtl gen|bound|fit|train|program|validate|exp.

Every subcommand takes ``--config FILE`` (JSON); explicit flags override
config values, and MTL_SEED overrides the config's seed (an explicit
--seed still wins). Results are printed as JSON.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__

log = logging.getLogger("mtl")


def _dump(obj, out=None):
    text = json.dumps(_jsonable(obj), indent=1)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _config(args) -> dict:
    return json.loads(Path(args.config).read_text()) if getattr(args, "config", None) else {}


def _merge(args, defaults: dict, skip=()) -> dict:
    """builtin defaults < config file < explicit flags (flags default to None)."""
    cfg = _config(args)
    out = dict(defaults)
    out.update({k: v for k, v in cfg.items() if k in defaults})
    for k in defaults:
        v = getattr(args, k, None)
        if v is not None and k not in skip:
            out[k] = v
    return out


def _seed(args, cfg_seed) -> int:
    from .harness.config import seed_from_env
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    return seed_from_env(int(cfg_seed))


# ---------------------------------------------------------------------------
# gen

_GEN_DEFAULTS = {
    "clusters": {"k": 4, "d": 50, "n_per_cluster": 2000, "label_mode": "linear", "sigma": 0.025,
                 "teacher_width": 10},
    "tree": {"h": 4, "gamma": 0.3, "k_vars": 4, "p": 4, "n_per_leaf": 256},
    "sql": {"table": None, "k_cols": 2, "n": 1000, "target": "pl_x", "n_rows": 11830,
            "n_cols": 10},
    "gravity": {"k": 5, "n": 10000, "r_min": 0.1},
    "parity": {"d": 30, "s": 8, "n": 20000, "flip": 0.1},
}


def cmd_gen(args) -> int:
    from . import taskgen as T
    base = dict(_GEN_DEFAULTS[args.generator], seed=0, normalize=False, test_frac=None)
    p = _merge(args, base)
    seed = _seed(args, p["seed"])
    g = args.generator
    if g == "clusters":
        ds = T.gen_clusters(p["k"], p["d"], p["n_per_cluster"], p["label_mode"], sigma=p["sigma"],
                            teacher_width=p["teacher_width"], seed=seed)
    elif g == "tree":
        ds = T.gen_tree_task(p["h"], p["gamma"], p["k_vars"], p["p"], p["n_per_leaf"], seed=seed)
    elif g == "sql":
        table = T.load_table(p["table"]) if p["table"] else \
            T.synthetic_table(p["n_rows"], p["n_cols"], seed=0)
        ds = T.gen_sql_task(table, p["k_cols"], p["target"], p["n"], seed=seed)
    elif g == "gravity":
        ds = T.gen_gravity(p["k"], p["n"], seed=seed, r_min=p["r_min"])
    else:
        ds = T.gen_parity_noise(p["d"], p["s"], p["n"], seed=seed, flip=p["flip"])
    if p["normalize"]:
        ds = T.normalize(ds)
    if p["test_frac"]:
        ds = ds.with_split(p["test_frac"], seed=seed)
    ds.to_csv(args.out)
    _dump({"generator": g, "rows": ds.n, "features": ds.d, "out": str(args.out),
           "meta": str(T.meta_path(args.out))})
    return 0


# ---------------------------------------------------------------------------
# bound


def _series(obj, default_radius=math.inf):
    from .series import PowerSeries1D
    if isinstance(obj, list):
        obj = {"coeffs": obj}
    obj = dict(obj)
    obj.setdefault("radius", default_radius)
    return PowerSeries1D.from_json(obj)


def bound_from_description(desc: dict):
    """LearnBound for a JSON bound description {kind: ..., params}."""
    from . import bounds as B
    from .series import tilde
    kind = desc.get("kind")
    if kind == "univariate":
        return B.univariate_bound(_series(desc.get("g", desc)), float(desc.get("beta", 1.0)))
    if kind == "product":
        return B.product_rule_bound(tilde(_series(desc["g"])), tilde(_series(desc["h"])))
    if kind == "chain":
        return B.chain_rule_bound(tilde(_series(desc["g"])), tilde(_series(desc["h"])))
    if kind == "cluster":
        leaves = [tilde(_series(f)) for f in desc["leaves"]]
        return B.cluster_bound(leaves, int(desc["p"]), int(desc.get("k", len(leaves))),
                               float(desc["eps"]), float(desc["r"]),
                               float(desc.get("c_poly", B.C_POLY)))
    if kind == "tree":
        return B.boolean_tree_bound(int(desc["d"]), int(desc["h"]))
    if kind == "margin_tree":
        return B.margin_tree_bound(int(desc["h"]), float(desc["gamma"]), float(desc["eps"]),
                                   int(desc["p"]), float(desc["leaf_tilde_sum"]))
    if kind == "gravity":
        return B.gravity_bound(int(desc["k"]), float(desc["R"]), float(desc["eps"]))
    if kind == "program":
        from .program import certify, parse
        from .program.parser import load_program
        prog = parse(desc["source"]) if "source" in desc else load_program(desc["file"])
        return certify(prog, float(desc["eps"])).bound
    raise ValueError(f"unknown bound kind {kind!r}")


def cmd_bound(args) -> int:
    from .bounds import ComplexityQuery, sample_complexity
    desc = _config(args)
    if args.description:
        desc.update(json.loads(args.description))
    b = bound_from_description(desc)
    out = b.to_json()
    eps = args.eps if args.eps is not None else desc.get("sample_eps")
    if eps is not None:
        q = ComplexityQuery(float(eps), float(args.delta), float(args.C))
        try:
            out["sample_complexity"] = sample_complexity(b, q)
        except OverflowError:
            out["sample_complexity"] = "inf"
        out["query"] = {"eps": q.eps, "delta": q.delta, "C": q.C}
    _dump(out, args.out)
    return 0


# ---------------------------------------------------------------------------
# fit / train


def _load_split(path, test_frac: float, seed: int):
    from .taskgen import LabeledDataset
    ds = LabeledDataset.from_csv(path)
    if ds.train_idx is None:
        ds = ds.with_split(test_frac, seed=seed)
    return ds


def _rmse(y, p) -> float:
    return float(np.sqrt(np.mean((np.asarray(p) - np.asarray(y)) ** 2)))


def cmd_fit(args) -> int:
    from . import kernels as K
    from .taskgen import normalize
    p = _merge(args, {"kernel": "relu_bias", "ridge": 0.0, "jitter": None, "test_frac": 0.2,
                      "seed": 0, "radius": 1.0})
    seed = _seed(args, p["seed"])
    ds = _load_split(args.data, p["test_frac"], seed)
    norms = np.linalg.norm(ds.X, axis=1)
    renorm = not np.allclose(norms, 1.0, atol=K.UNIT_TOL)
    if renorm:
        ds = normalize(ds)
    (Xtr, ytr), (Xte, yte) = ds.train(), ds.test()
    reg = K.KernelRegressor(K.KernelSpec(p["kernel"], r=p["radius"]), p["ridge"], p["jitter"])
    reg.fit(Xtr, ytr)
    _dump({"kernel": reg.spec.family, "train_rmse": _rmse(ytr, reg.predict(Xtr)),
           "test_rmse": _rmse(yte, reg.predict(Xte)), "complexity": reg.complexity(ytr),
           "jitter": reg.gram_.jitter, "normalized_inputs": renorm}, args.out)
    return 0


def cmd_train(args) -> int:
    from . import net as N
    from .taskgen import normalize
    p = _merge(args, {"width": 1024, "mode": "top_only", "epochs": 100, "lr": 0.1,
                      "activation": "relu", "input_map": "bias", "solver": "sgd",
                      "momentum": 0.0, "batch_size": 32, "ridge": 0.0, "loss": "squared",
                      "test_frac": 0.2, "seed": 0, "radius": 1.0, "normalize": False})
    seed = _seed(args, p["seed"])
    ds = _load_split(args.data, p["test_frac"], seed)
    if p["normalize"]:
        ds = normalize(ds)
    (Xtr, ytr), (Xte, yte) = ds.train(), ds.test()
    net = N.init(seed, p["width"], ds.d, p["activation"], mode=p["mode"],
                 input_map=p["input_map"], radius=p["radius"])
    cfg = N.TrainConfig(mode=p["mode"], learning_rate=p["lr"], epochs=p["epochs"],
                        batch_size=p["batch_size"], loss=p["loss"], seed=seed,
                        momentum=p["momentum"], solver=p["solver"], ridge=p["ridge"])
    net, hist = N.train(net, Xtr, ytr, cfg)
    if args.save:
        N.save(net, args.save)
    _dump({"width": net.width, "mode": p["mode"], "train_rmse": _rmse(ytr, net(Xtr)),
           "test_rmse": _rmse(yte, net(Xte)), "final_loss": hist[-1], "epochs": len(hist),
           "saved": args.save}, args.out)
    return 0


# ---------------------------------------------------------------------------
# program


def cmd_program(args) -> int:
    from .errors import UndefinedRegionError
    from .program import certify, depth, evaluate, lower, parse
    text = sys.stdin.read() if args.file == "-" else Path(args.file).read_text()
    prog = parse(text)
    out = {"depth": depth(prog)}
    low = None
    if args.lower or args.certify:
        low = lower(prog, args.eps, degree_cap=args.degree_cap)
        if args.lower:
            out["lowered"] = {"degree": low.degree, "eps": args.eps,
                              "log10_sqrt_M": low.log_sqrt_M("lowered") / math.log(10)}
        if args.certify:
            out["certificate"] = certify(prog, args.eps, lowered=low).to_json()
    if args.eval is not None:
        x = np.asarray(args.eval, float)
        try:
            out["value"] = evaluate(prog, x)
        except UndefinedRegionError as e:
            out["value"] = None
            out["undefined"] = str(e)
        if low is not None:
            out["lowered_value"] = low(x[None, :])[0]
    _dump(out, args.out)
    return 0


# ---------------------------------------------------------------------------
# validate / exp


def cmd_validate(args) -> int:
    from .validation import run_suite
    p = _merge(args, {"seed": 0, "quick": False})
    reports = run_suite(_seed(args, p["seed"]), quick=bool(args.quick or p["quick"]))
    _dump([r.to_json() for r in reports], args.out)
    failed = [r.name for r in reports if not r.passed]
    if failed:
        log.error("%d of %d oracle checks failed", len(failed), len(reports))
    return 0 if not failed else 1


def _parse_set(items) -> dict:
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ValueError(f"--set expects key=value, got {item!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def cmd_exp(args) -> int:
    from .harness import load_config, preset, run
    from .harness.config import seed_from_env, validate
    top = {k: v for k, v in (("trials", args.trials), ("out_dir", args.out),
                             ("workers", args.workers)) if v is not None}
    params = _parse_set(args.set)
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        if args.experiment and raw.get("experiment", args.experiment) != args.experiment:
            raise ValueError("experiment name conflicts with the config file")
        cfg = load_config(args.config, **top)
        cfg.params.update(params)
        validate(cfg)
    else:
        if not args.experiment:
            raise ValueError("name an experiment or pass --config")
        cfg = preset(args.experiment, args.preset, params=params, **top)
    cfg.seed = int(args.seed) if args.seed is not None else seed_from_env(cfg.seed)
    if cfg.out_dir is None:
        cfg.out_dir = "results"
    rep = run(cfg, figures=not args.no_figures)
    summary = {"experiment": cfg.experiment, "preset": cfg.preset, "seed": cfg.seed,
               "completed": rep.completed, "wall_clock": rep.wall_clock,
               "out_dir": cfg.out_dir, "aggregates": rep.aggregates, "fits": rep.fits,
               "failed_trials": [t for t in rep.trials if t["status"] != "ok"]}
    _dump(summary)
    return 0 if rep.completed else 1


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mtl", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"mtl {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out=True, seed=True):
        p.add_argument("--config", help="JSON file with default values")
        if seed:
            p.add_argument("--seed", type=int)
        if out:
            p.add_argument("--out", help="write JSON here instead of stdout")

    g = sub.add_parser("gen", help="generate a synthetic dataset CSV")
    gsub = g.add_subparsers(dest="generator", required=True)
    for name, flags in _GEN_DEFAULTS.items():
        gp = gsub.add_parser(name)
        common(gp, out=False)
        gp.add_argument("--out", required=True, help="dataset CSV path")
        gp.add_argument("--normalize", action="store_const", const=True)
        gp.add_argument("--test-frac", type=float)
        for key, val in flags.items():
            typ = type(val) if val is not None else str
            gp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ)

    b = sub.add_parser("bound", help="learning bound from a JSON description")
    common(b, seed=False)
    b.add_argument("description", nargs="?", help="inline JSON description")
    b.add_argument("--eps", type=float, help="also report the sample complexity at this error")
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--C", type=float, default=1.0, help="sample-complexity constant")

    f = sub.add_parser("fit", help="kernel regression on a dataset CSV")
    common(f)
    f.add_argument("data")
    f.add_argument("--kernel", choices=["relu_bias", "relu_bias_ntk", "relu_bias_nngp",
                                        "gaussian", "slow_decay"])
    f.add_argument("--ridge", type=float)
    f.add_argument("--jitter", type=float)
    f.add_argument("--radius", type=float, help="gaussian kernel radius")
    f.add_argument("--test-frac", type=float)

    t = sub.add_parser("train", help="train a two-layer net on a dataset CSV")
    common(t)
    t.add_argument("data")
    t.add_argument("--width", type=int)
    t.add_argument("--mode", choices=["top_only", "full"])
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--activation", choices=["relu", "exponential"])
    t.add_argument("--input-map", dest="input_map", choices=["none", "bias", "radius"])
    t.add_argument("--radius", type=float)
    t.add_argument("--solver", choices=["sgd", "exact"])
    t.add_argument("--momentum", type=float)
    t.add_argument("--batch-size", dest="batch_size", type=int)
    t.add_argument("--ridge", type=float)
    t.add_argument("--loss", choices=["squared", "logistic"])
    t.add_argument("--test-frac", type=float)
    t.add_argument("--normalize", action="store_const", const=True)
    t.add_argument("--save", help="write the trained net (binary MTL1 format)")

    p = sub.add_parser("program", help="parse, lower, certify or evaluate a decision program")
    common(p, seed=False)
    p.add_argument("file", help="program file, or - for stdin")
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--lower", action="store_true")
    p.add_argument("--certify", action="store_true")
    p.add_argument("--eval", nargs="+", type=float, metavar="X")
    p.add_argument("--degree-cap", type=int, default=10**9)

    v = sub.add_parser("validate", help="run the numeric oracle suite")
    common(v)
    v.add_argument("--quick", action="store_true")

    e = sub.add_parser("exp", help="run an experiment")
    e.add_argument("experiment", nargs="?")
    e.add_argument("--config")
    e.add_argument("--preset", default="desk", choices=["desk", "full", "smoke"])
    e.add_argument("--trials", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--out", help="output directory (default ./results)")
    e.add_argument("--workers", type=int)
    e.add_argument("--set", action="append", metavar="KEY=JSON", help="override a parameter")
    e.add_argument("--no-figures", action="store_true")
    return ap


_COMMANDS = {"gen": cmd_gen, "bound": cmd_bound, "fit": cmd_fit, "train": cmd_train,
             "program": cmd_program, "validate": cmd_validate, "exp": cmd_exp}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    from .errors import MTLError
    try:
        return _COMMANDS[args.command](args)
    except (MTLError, ValueError, OSError, KeyError, json.JSONDecodeError) as e:
        print(f"mtl {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
