"""Configuration, presets, experiments, sweeps, checkpoints and acceptance checks."""
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .experiment import ExperimentReport, run_experiment
from .presets import build_initial, smallness_product
from .sweep import run_sweep

__all__ = [
    "CheckpointError",
    "load_checkpoint",
    "save_checkpoint",
    "ConfigError",
    "RunConfig",
    "load_config",
    "ExperimentReport",
    "run_experiment",
    "build_initial",
    "smallness_product",
    "run_sweep",
]
