from .config import ConfigError, ExperimentConfig, PolicySpec, config_from_dict, load_config
from .runner import MetricsSummary, run, sweep, train_cli

__all__ = ["ConfigError", "ExperimentConfig", "PolicySpec", "config_from_dict", "load_config",
           "MetricsSummary", "run", "sweep", "train_cli"]
