"""Configuration-driven experiment runner, metrics and report output."""
from .config import EXPERIMENTS, PRESETS, ExperimentConfig, load_config, preset, seed_from_env
from .metrics import accuracy, normalized_rmse, r_squared, scaling_fit
from .runner import ExperimentReport, aggregate, run

__all__ = ["EXPERIMENTS", "PRESETS", "ExperimentConfig", "ExperimentReport", "accuracy",
           "aggregate", "load_config", "normalized_rmse", "preset", "r_squared", "run",
           "scaling_fit", "seed_from_env"]
