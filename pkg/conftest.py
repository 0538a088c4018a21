"""Shared fixtures for the test suite."""

import numpy as np
import pytest

from evaluation.runner import ForwardRunner, RunConfig
from moe_engine import ModelSpec, TokenSequence, build_synthetic_model
from skipping.gmlg import CalibrationSet, calibrate_alpha


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: model-backed benchmarks that take tens of seconds")


def pytest_collection_modifyitems(config, items):
    if "slow" in (config.getoption("-m") or ""):
        return
    skip_slow = pytest.mark.skip(reason="slow benchmark; run with -m slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


def make_samples(seed: int, count: int, length: int, vocab_size: int, vision_fraction: float = 0.5):
    rng = np.random.default_rng(seed)
    tokens = rng.integers(0, vocab_size, size=(count, length))
    is_vision = rng.random((count, length)) < vision_fraction
    return [TokenSequence(tokens[i], is_vision[i]) for i in range(count)]


def make_calibration(spec: ModelSpec, count: int, length: int = 6, seed: int = 7, vision_fraction: float = 0.5):
    return CalibrationSet(make_samples(seed, count, length, spec.vocab_size, vision_fraction), seed=seed)


@pytest.fixture(scope="session")
def small_spec():
    return ModelSpec(num_layers=3, experts_per_layer=8, top_k=2, hidden_dim=8, ffn_dim=16, vocab_size=32, seed=11)


@pytest.fixture(scope="session")
def small_model(small_spec):
    return build_synthetic_model(small_spec)


@pytest.fixture(scope="session")
def small_calibration(small_spec):
    return make_calibration(small_spec, count=8)


@pytest.fixture(scope="session")
def small_factors(small_model, small_calibration):
    return calibrate_alpha(small_model, small_calibration)


@pytest.fixture(scope="session")
def medium_spec():
    return ModelSpec(num_layers=4, experts_per_layer=16, top_k=4, hidden_dim=16, ffn_dim=32, vocab_size=64, seed=3)


@pytest.fixture(scope="session")
def medium_model(medium_spec):
    return build_synthetic_model(medium_spec)


@pytest.fixture(scope="session")
def medium_calibration(medium_spec):
    return make_calibration(medium_spec, count=32, length=8, seed=5)


@pytest.fixture(scope="session")
def medium_runner(medium_model, medium_calibration):
    return ForwardRunner(medium_model, medium_calibration.samples, RunConfig())


@pytest.fixture(scope="session")
def medium_factors(medium_model, medium_calibration, medium_runner):
    return calibrate_alpha(medium_model, medium_calibration, runner=medium_runner)
