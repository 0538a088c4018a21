"""
Experiment configuration.

The configuration file is plain KEY=VALUE text, one field per line, read
with python-dotenv. ``CONFIG_VERSION`` comes first; every other field is
required. ``save_config`` writes the fields in declaration order so that
load -> save reproduces a saved file byte for byte.
"""

import logging
import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from dotenv import dotenv_values, load_dotenv

from evaluation.runner import RunConfig, default_threads
from moe_engine.model import ModelSpec, RoutingMode
from skipping.dmt import ScoreMode
from io_config.errors import ConfigParseError

logger = logging.getLogger(__name__)

CONFIG_VERSION = 1
POLICIES = ("dmt", "single", "reduced-k", "mass-rule")
SEED_ENV = "MODES_SEED"
THREADS_ENV = "MODES_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 42
    num_layers: int = 6
    experts_per_layer: int = 16
    top_k: int = 4
    hidden_dim: int = 32
    ffn_dim: int = 64
    vocab_size: int = 128
    text_router_temperature: float = 1.0
    vision_router_temperature: float = 1.0
    num_samples: int = 1024
    sequence_length: int = 16
    text_fraction: float = 0.5
    grid_size: int = 100
    rho: float = 0.8
    policy: str = "dmt"
    k_prime: int = 0  # 0: derived from rho
    score_mode: str = "gmlg"
    routing: str = "frozen"
    batch_size: int = 64
    threads: int = 0  # 0: all cores

    def __post_init__(self):
        self.model_spec()
        if self.num_samples < 1:
            raise ConfigParseError("must be >= 1", field="NUM_SAMPLES")
        if self.sequence_length < 1:
            raise ConfigParseError("must be >= 1", field="SEQUENCE_LENGTH")
        if not 0.0 <= self.text_fraction <= 1.0:
            raise ConfigParseError("must be in [0, 1]", field="TEXT_FRACTION")
        if self.grid_size < 2:
            raise ConfigParseError("must be >= 2", field="GRID_SIZE")
        if not 0.0 < self.rho < 1.0:
            raise ConfigParseError("must be in (0, 1)", field="RHO")
        if self.policy not in POLICIES:
            raise ConfigParseError(f"must be one of {', '.join(POLICIES)}", field="POLICY")
        if not 0 <= self.k_prime <= self.top_k:
            raise ConfigParseError(f"must be in [0, {self.top_k}]", field="K_PRIME")
        if self.score_mode not in {m.value for m in ScoreMode}:
            raise ConfigParseError("must be gmlg or local", field="SCORE_MODE")
        if self.routing not in {m.value for m in RoutingMode}:
            raise ConfigParseError("must be frozen or live", field="ROUTING")
        if self.batch_size < 1:
            raise ConfigParseError("must be >= 1", field="BATCH_SIZE")
        if self.threads < 0:
            raise ConfigParseError("must be >= 0", field="THREADS")

    def model_spec(self) -> ModelSpec:
        try:
            return ModelSpec(
                num_layers=self.num_layers,
                experts_per_layer=self.experts_per_layer,
                top_k=self.top_k,
                hidden_dim=self.hidden_dim,
                ffn_dim=self.ffn_dim,
                vocab_size=self.vocab_size,
                seed=self.seed,
                text_router_temperature=self.text_router_temperature,
                vision_router_temperature=self.vision_router_temperature,
            )
        except ValueError as e:
            raise ConfigParseError(str(e)) from e

    def run_config(self) -> RunConfig:
        return RunConfig(
            threads=self.threads or default_threads(),
            batch_size=self.batch_size,
            routing=RoutingMode(self.routing),
        )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _key(name: str) -> str:
    return name.upper()


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(raw: str, kind: type, key: str, line: Optional[int]):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigParseError(f"cannot parse {raw!r} as {kind.__name__}", field=key, line=line) from None


def _line_numbers(path: Path) -> dict[str, int]:
    numbers = {}
    for number, text in enumerate(path.read_text().splitlines(), start=1):
        text = text.strip()
        if text and not text.startswith("#") and "=" in text:
            numbers.setdefault(text.split("=", 1)[0].strip(), number)
    return numbers


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    values = dotenv_values(path)
    lines = _line_numbers(path)

    version = values.get("CONFIG_VERSION")
    if version is None:
        raise ConfigParseError("missing required field", field="CONFIG_VERSION")
    if version.strip() != str(CONFIG_VERSION):
        raise ConfigParseError(
            f"unsupported version {version!r}, expected {CONFIG_VERSION}",
            field="CONFIG_VERSION", line=lines.get("CONFIG_VERSION"),
        )

    known = {_key(f.name) for f in fields(ExperimentConfig)} | {"CONFIG_VERSION"}
    for key in values:
        if key not in known:
            raise ConfigParseError("unknown field", field=key, line=lines.get(key))

    kwargs = {}
    types = {"int": int, "float": float, "str": str}
    for f in fields(ExperimentConfig):
        key = _key(f.name)
        raw = values.get(key)
        if raw is None or raw.strip() == "":
            raise ConfigParseError("missing required field", field=key, line=lines.get(key))
        kind = f.type if isinstance(f.type, type) else types[f.type]
        kwargs[f.name] = _coerce(raw.strip(), kind, key, lines.get(key))

    try:
        return ExperimentConfig(**kwargs)
    except ConfigParseError as e:
        raise ConfigParseError(e.detail, field=e.field, line=lines.get(e.field or "")) from None


def save_config(config: ExperimentConfig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    out = [f"CONFIG_VERSION={CONFIG_VERSION}"]
    out += [f"{_key(f.name)}={_format(getattr(config, f.name))}" for f in fields(config)]
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(out) + "\n")


def apply_env_overrides(config: ExperimentConfig, threads: Optional[int] = None) -> ExperimentConfig:
    """MODES_SEED / MODES_THREADS from the environment (or a .env file); ``threads`` wins over both."""
    load_dotenv()
    changes = {}
    seed = os.getenv(SEED_ENV)
    if seed:
        changes["seed"] = _coerce(seed, int, SEED_ENV, None)
    env_threads = os.getenv(THREADS_ENV)
    if env_threads:
        changes["threads"] = _coerce(env_threads, int, THREADS_ENV, None)
    if threads is not None:
        changes["threads"] = threads
    if changes:
        logger.info("config overrides: %s", changes)
        return replace(config, **changes)
    return config
