"""Experiment configuration, presets and validation."""
from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

EXPERIMENTS = ("clusters", "tree", "sql", "gravity", "scaling", "complexity_probe",
               "parity_control")
PRESETS = ("desk", "full", "smoke")

# full-network SGD budget shared by the tree task and the parity control
_SGD_NET = {"kind": "net", "width": 512, "activation": "relu", "input_map": "bias",
            "mode": "full", "solver": "sgd", "learning_rate": 0.05, "epochs": 200,
            "batch_size": 32, "momentum": 0.9, "ridge": 0.0, "standardize": True}


def _exact_net(width, ridge=0.0, activation="relu", input_map="bias", radius=1.0):
    return {"kind": "net", "width": width, "activation": activation, "input_map": input_map,
            "radius": radius, "mode": "top_only", "solver": "exact", "ridge": ridge,
            "standardize": False}


_DESK = {
    "clusters": dict(
        params={"k_values": [2, 4, 8, 16], "d": 50, "n_per_cluster": 2000,
                "label_mode": "linear", "sigma": 0.025, "test_frac": 0.2},
        models={"net": _exact_net(2048)}, trials=3),
    "tree": dict(
        params={"h": 4, "gammas": [0.1, 0.3], "k_vars": 4, "p": 4, "n_per_leaf": 256,
                "test_frac": 0.2},
        models={"net": _SGD_NET}, trials=3),
    "sql": dict(
        params={"widths": [1, 2, 3, 4, 5], "n_train": 16384, "n_test": 4096, "table": None,
                "n_rows": 11830, "n_cols": 10, "target": "pl_x"},
        models={"net": _exact_net(8192, ridge=1e-4)}, trials=1),
    "gravity": dict(
        params={"k_values": [5, 20, 50], "n": 50000, "test_frac": 0.1,
                "power_target": {"degree": 4, "d": 50}},
        models={"relu": _exact_net(1000),
                "gaussian": _exact_net(1000, activation="exponential", input_map="radius")},
        trials=3),
    "scaling": dict(
        params={"ns": [250, 500, 1000, 2000, 4000], "n_test": 2000, "noise": 0.1,
                "targets": ["analytic", "tree"],
                "analytic": {"d": 5, "degree": 2},
                "tree": {"h": 2, "gamma": 0.3, "k_vars": 2, "p": 2}},
        models={"kernel": {"kind": "kernel", "family": "relu_bias_ntk", "ridge": "loo"}},
        trials=3),
    "complexity_probe": dict(
        params={"degrees": [1, 2, 3], "d": 5, "n": 200},
        models={"kernel": {"kind": "kernel", "family": "relu_bias_ntk", "ridge": 0.0}},
        trials=3),
    "parity_control": dict(
        params={"d": 30, "s": 8, "n": 20000, "flip": 0.1, "test_frac": 0.2},
        models={"net": _SGD_NET}, trials=3),
}


def _full():
    p = copy.deepcopy(_DESK)
    p["clusters"]["models"]["net"]["width"] = 50000
    p["tree"]["trials"] = 7
    p["tree"]["models"]["net"]["width"] = 32 * 2 ** 4
    p["sql"]["models"]["net"]["width"] = 40000
    p["gravity"]["params"].update(k_values=[5, 20, 50, 100, 200, 400], n=5_000_000)
    return p


def _smoke():
    s = copy.deepcopy(_DESK)
    s["clusters"]["params"].update(k_values=[2, 4], d=10, n_per_cluster=100)
    s["clusters"]["models"]["net"]["width"] = 256
    s["tree"]["params"].update(h=2, n_per_leaf=64, k_vars=2, p=2)
    s["tree"]["models"]["net"].update(width=64, epochs=5)
    s["sql"]["params"].update(widths=[1, 2], n_train=400, n_test=100, n_rows=300)
    s["sql"]["models"]["net"]["width"] = 256
    s["gravity"]["params"].update(k_values=[2, 3], n=600, power_target={"degree": 4, "d": 5})
    for m in s["gravity"]["models"].values():
        m["width"] = 128
    s["scaling"]["params"].update(ns=[40, 60, 90, 135], n_test=100)
    s["complexity_probe"]["params"].update(n=60)
    s["parity_control"]["params"].update(d=8, s=3, n=500)
    s["parity_control"]["models"]["net"].update(width=64, epochs=5)
    for e in s.values():
        e["trials"] = 2
    return s


_PRESETS = {"desk": _DESK, "full": _full(), "smoke": _smoke()}


@dataclass
class ExperimentConfig:
    experiment: str
    params: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    trials: int = 1
    seed: int = 0
    out_dir: str | None = None
    preset: str = "desk"
    workers: int = 1

    def __post_init__(self):
        validate(self)

    def to_json(self) -> dict:
        return asdict(self)

    def trial_seed(self, trial: int) -> int:
        """Seed of one trial; depends only on the master seed and the trial index."""
        return int(self.seed) + int(trial)


def preset(experiment: str, name: str = "desk", **overrides) -> ExperimentConfig:
    """Config for ``experiment`` from a named preset, with top-level and params overrides."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESETS}")
    if experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {experiment!r}; choose from {EXPERIMENTS}")
    base = copy.deepcopy(_PRESETS[name][experiment])
    params = dict(base["params"], **overrides.pop("params", {}))
    models = base["models"]
    for mname, mover in overrides.pop("models", {}).items():
        models[mname] = dict(models.get(mname, {}), **mover)
    kw = {"trials": base["trials"], **overrides}
    return ExperimentConfig(experiment, params, models, preset=name, **kw)


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a JSON config; missing fields come from the preset it names (default desk)."""
    raw = json.loads(Path(path).read_text())
    if "experiment" not in raw:
        raise ValueError(f"{path}: config needs an 'experiment' field")
    exp = raw.pop("experiment")
    name = raw.pop("preset", "desk")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return preset(exp, name, **raw)


def seed_from_env(default: int) -> int:
    """MTL_SEED, when set, overrides the master seed."""
    v = os.environ.get("MTL_SEED")
    if v is None or v == "":
        return default
    try:
        return int(v)
    except ValueError:
        raise ValueError(f"MTL_SEED must be an integer, got {v!r}") from None


_PARAM_KEYS = {e: set(v["params"]) for e, v in _DESK.items()}
_NET_KEYS = {"kind", "width", "activation", "input_map", "radius", "mode", "solver",
             "learning_rate", "epochs", "batch_size", "momentum", "ridge", "standardize"}
_KERNEL_KEYS = {"kind", "family", "ridge", "r", "s", "D"}


def validate(cfg: ExperimentConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {cfg.experiment!r}; choose from {EXPERIMENTS}")
    if not isinstance(cfg.trials, int) or cfg.trials < 1:
        raise ValueError("trial count must be an integer >= 1")
    if cfg.workers < 1:
        raise ValueError("workers must be >= 1")
    if cfg.preset not in PRESETS:
        raise ValueError(f"unknown preset {cfg.preset!r}")
    extra = set(cfg.params) - _PARAM_KEYS[cfg.experiment]
    if extra:
        raise ValueError(f"unknown {cfg.experiment} parameter(s): {sorted(extra)}")
    missing = _PARAM_KEYS[cfg.experiment] - set(cfg.params)
    if missing:
        raise ValueError(f"missing {cfg.experiment} parameter(s): {sorted(missing)}")
    if not cfg.models:
        raise ValueError("at least one model is required")
    for name, m in cfg.models.items():
        kind = m.get("kind")
        keys = {"net": _NET_KEYS, "kernel": _KERNEL_KEYS}.get(kind)
        if keys is None:
            raise ValueError(f"model {name!r}: kind must be 'net' or 'kernel'")
        bad = set(m) - keys
        if bad:
            raise ValueError(f"model {name!r}: unknown field(s) {sorted(bad)}")
        if kind == "net" and int(m.get("width", 0)) < 1:
            raise ValueError(f"model {name!r}: width must be >= 1")
        if kind == "kernel":
            r = m.get("ridge", 0.0)
            if not (r == "loo" or (isinstance(r, (int, float)) and r >= 0)):
                raise ValueError(f"model {name!r}: ridge must be >= 0 or 'loo'")
    p = cfg.params
    for key in ("k_values", "gammas", "widths", "ns", "degrees"):
        if key in p and (not isinstance(p[key], list) or not p[key]):
            raise ValueError(f"{key} must be a nonempty list")
    if cfg.experiment == "tree" and any(not 0 <= g < 1 for g in p["gammas"]):
        raise ValueError("tree margins must lie in [0, 1)")
    if cfg.experiment == "scaling":
        if len(p["ns"]) < 4:
            raise ValueError("scaling needs at least 4 sample sizes")
        if set(p["targets"]) - {"analytic", "tree"}:
            raise ValueError("scaling targets are 'analytic' and 'tree'")
    if cfg.experiment == "complexity_probe" and any(m["kind"] != "kernel" for m in cfg.models.values()):
        raise ValueError("complexity_probe needs kernel models")
