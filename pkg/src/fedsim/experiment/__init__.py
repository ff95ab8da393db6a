""" Config-driven experiment runner: metrics, artifacts and figures."""

from ..metrics import (
    CSV_COLUMNS,
    RoundReport,
    cumulative_mean,
    evaluate_backdoor,
    evaluate_main,
    recommend_norm_bound,
    summarize_norms,
)
from .config import ExperimentConfig, load_config, parse_config
from .plotting import render_curves
from .runner import Experiment, build_experiment, run_experiment, write_metrics_csv

__all__ = [
    "CSV_COLUMNS",
    "RoundReport",
    "cumulative_mean",
    "evaluate_backdoor",
    "evaluate_main",
    "recommend_norm_bound",
    "summarize_norms",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "render_curves",
    "Experiment",
    "build_experiment",
    "run_experiment",
    "write_metrics_csv",
]
