"""Seeded synthetic calibration sets and their CSV form."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd

from io_config.config import ExperimentConfig
from io_config.errors import ModelFormatError
from moe_engine.seeds import make_rng
from moe_engine.tokens import TokenSequence
from skipping.gmlg import CalibrationSet

logger = logging.getLogger(__name__)

DATASET_COLUMNS = ["sample", "position", "token", "is_vision"]


def generate_calibration_set(config: ExperimentConfig) -> CalibrationSet:
    """N sequences of ``sequence_length`` tokens drawn from the "data" substream.

    Each token is vision with probability 1 - text_fraction.
    """
    rng = make_rng(config.seed, "data")
    shape = (config.num_samples, config.sequence_length)
    tokens = rng.integers(0, config.vocab_size, size=shape)
    is_vision = rng.random(shape) >= config.text_fraction
    samples = [TokenSequence(tokens[i], is_vision[i]) for i in range(config.num_samples)]
    logger.debug("generated %d samples, vision fraction %.3f", len(samples), is_vision.mean())
    return CalibrationSet(samples, seed=config.seed)


def dataset_frame(calibration: CalibrationSet) -> pd.DataFrame:
    frames = []
    for i, sample in enumerate(calibration):
        n = len(sample)
        frames.append(pd.DataFrame({
            "sample": np.full(n, i, dtype=np.int64),
            "position": np.arange(n, dtype=np.int64),
            "token": sample.embed_indices.astype(np.int64),
            "is_vision": sample.is_vision.astype(np.int64),
        }))
    return pd.concat(frames, ignore_index=True)[DATASET_COLUMNS]


def save_dataset(calibration: CalibrationSet, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# seed={calibration.seed or 0}\n")
        dataset_frame(calibration).to_csv(fh, index=False, lineterminator="\n")


def load_dataset(path: str | Path) -> CalibrationSet:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with open(path) as fh:
        first = fh.readline().strip()
        if not first.startswith("# seed="):
            raise ModelFormatError(f"{path}: missing '# seed=' header")
        seed = int(first.split("=", 1)[1])
        frame = pd.read_csv(fh)
    if list(frame.columns) != DATASET_COLUMNS:
        raise ModelFormatError(f"{path}: expected columns {DATASET_COLUMNS}, got {list(frame.columns)}")
    samples = []
    for index, group in frame.groupby("sample", sort=True):
        if index != len(samples):
            raise ModelFormatError(f"{path}: sample ids must be consecutive from 0")
        group = group.sort_values("position")
        samples.append(TokenSequence(group["token"].to_numpy(), group["is_vision"].to_numpy().astype(bool)))
    return CalibrationSet(samples, seed=seed)
