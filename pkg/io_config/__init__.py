"""
Configuration, calibration data and artifact files.
"""

from io_config.config import (
    CONFIG_VERSION,
    ExperimentConfig,
    apply_env_overrides,
    load_config,
    save_config,
)
from io_config.dataset import generate_calibration_set, load_dataset, save_dataset
from io_config.errors import ConfigParseError, ModelFormatError
from io_config.storage import (
    file_hash,
    load_beta,
    load_factors,
    load_model,
    save_beta,
    save_factors,
    save_model,
)

__all__ = [
    "CONFIG_VERSION",
    "ConfigParseError",
    "ExperimentConfig",
    "ModelFormatError",
    "apply_env_overrides",
    "file_hash",
    "generate_calibration_set",
    "load_beta",
    "load_config",
    "load_dataset",
    "load_factors",
    "load_model",
    "save_beta",
    "save_config",
    "save_dataset",
    "save_factors",
    "save_model",
]
