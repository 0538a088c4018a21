"""
Globally-modulated local gating.

Each layer gets a global factor: the average KL divergence between the
model's output distribution and the distribution obtained when every routed
expert of that layer is skipped. Normalized across layers, the factor scales
the local routing probability into an importance score s = alpha_norm[l] * pi.
"""

import hashlib
import logging
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from evaluation.runner import ForwardRunner, RunConfig
from moe_engine.errors import InvalidArgumentError, InvalidInputError
from moe_engine.model import SyntheticMoEModel
from moe_engine.policies import LayerAblation
from moe_engine.tokens import TokenSequence

logger = logging.getLogger(__name__)

KL_EPS = 1e-12
PROB_TOL = 1e-9
ALPHA_NORM_FLOOR = 1e-9


class CalibrationSet:
    """N held-out token sequences used for calibration and threshold search."""

    def __init__(self, samples: list[TokenSequence], seed: Optional[int] = None):
        if not samples:
            raise InvalidInputError("calibration set needs at least one sample")
        for i, sample in enumerate(samples):
            if len(sample) == 0:
                raise InvalidInputError(f"calibration sample {i} is empty")
        self.samples = list(samples)
        self.seed = seed

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[TokenSequence]:
        return iter(self.samples)

    def __getitem__(self, index):
        return self.samples[index]

    @property
    def vision_fraction(self) -> float:
        total = sum(len(s) for s in self.samples)
        return sum(int(s.is_vision.sum()) for s in self.samples) / total

    def content_hash(self) -> str:
        digest = hashlib.sha256()
        for sample in self.samples:
            digest.update(len(sample).to_bytes(8, "little"))
            digest.update(sample.embed_indices.astype("<i8").tobytes())
            digest.update(sample.is_vision.astype(np.uint8).tobytes())
        return digest.hexdigest()[:16]


@dataclass
class GlobalFactors:
    """Per-layer global factors and their normalized form."""
    alpha: np.ndarray
    alpha_norm: np.ndarray
    model_hash: str = ""
    num_samples: int = 0
    seed: int = 0

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, dtype=np.float64)
        self.alpha_norm = np.asarray(self.alpha_norm, dtype=np.float64)
        if self.alpha.shape != self.alpha_norm.shape or self.alpha.ndim != 1:
            raise InvalidInputError("alpha and alpha_norm must be vectors of equal length")
        if np.any(self.alpha < 0):
            raise InvalidInputError("alpha must be non-negative")
        if np.any(self.alpha_norm <= 0) or np.any(self.alpha_norm > 1):
            raise InvalidInputError("alpha_norm entries must lie in (0, 1]")

    @classmethod
    def from_alpha(cls, alpha, **meta) -> "GlobalFactors":
        return cls(alpha=alpha, alpha_norm=normalize_alpha(alpha), **meta)

    @property
    def num_layers(self) -> int:
        return int(self.alpha.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GlobalFactors):
            return NotImplemented
        return (
            np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.alpha_norm, other.alpha_norm)
            and (self.model_hash, self.num_samples, self.seed)
            == (other.model_hash, other.num_samples, other.seed)
        )


def _check_distribution(name: str, v: np.ndarray) -> None:
    if v.ndim != 1 or v.size == 0 or not np.all(np.isfinite(v)):
        raise InvalidInputError(f"{name} must be a finite non-empty vector")
    if np.any(v < 0):
        raise InvalidInputError(f"{name} has negative entries")
    if abs(v.sum() - 1.0) > PROB_TOL:
        raise InvalidInputError(f"{name} sums to {v.sum():.12g}, expected 1")


def kl_divergence(p, q) -> float:
    """D_KL(p || q) in nats, with q floored at 1e-12 inside the log."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    _check_distribution("p", p)
    _check_distribution("q", q)
    if p.shape != q.shape:
        raise InvalidInputError(f"p and q differ in shape: {p.shape} vs {q.shape}")
    return float(kl_rows(p[None, :], q[None, :])[0])


def kl_rows(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Row-wise KL divergence for (n, V) distribution matrices."""
    positive = P > 0
    ratio = np.divide(P, np.maximum(Q, KL_EPS), out=np.ones_like(P), where=positive)
    terms = np.where(positive, P * np.log(ratio), 0.0)
    # rounding can push an identical-distribution KL a hair below zero
    return np.maximum(terms.sum(axis=1), 0.0)


def normalize_alpha(alpha) -> np.ndarray:
    """alpha / sum(alpha), with every entry kept at or above ALPHA_NORM_FLOOR.

    A layer whose ablation changes nothing still scores above zero, so the
    smallest positive threshold skips nothing in any layer.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    total = alpha.sum()
    if total > 0:
        norm = alpha / total
    else:
        logger.warning("all global factors are zero; using uniform normalized factors")
        norm = np.full(alpha.shape, 1.0 / alpha.size)
    if np.any(norm < ALPHA_NORM_FLOOR):
        logger.warning("%d layer(s) below the global factor floor", int(np.sum(norm < ALPHA_NORM_FLOOR)))
        norm = np.maximum(norm, ALPHA_NORM_FLOOR)
        norm = norm / norm.sum()
    return norm


def calibrate_alpha(
    model: SyntheticMoEModel,
    calibration: CalibrationSet,
    config: Optional[RunConfig] = None,
    runner: Optional[ForwardRunner] = None,
) -> GlobalFactors:
    """Global factor of every layer from layer-ablation KL on the calibration set."""
    runner = runner or ForwardRunner(model, calibration.samples, config)
    reference = runner.reference().distributions
    alpha = np.zeros(model.spec.num_layers, dtype=np.float64)
    for layer in range(model.spec.num_layers):
        ablated = runner.run(LayerAblation(layer)).distributions
        alpha[layer] = float(np.mean(kl_rows(reference, ablated)))
        logger.info("layer %d: alpha=%.6g", layer, alpha[layer])
    return GlobalFactors.from_alpha(
        alpha,
        model_hash=model.fingerprint(),
        num_samples=len(calibration),
        seed=calibration.seed or 0,
    )


def importance_score(factors: GlobalFactors, layer: int, pi: float) -> float:
    """s = alpha_norm[layer] * pi for a routed expert with probability pi."""
    if not 0 <= layer < factors.num_layers:
        raise InvalidArgumentError(f"layer must be in [0, {factors.num_layers}), got {layer}")
    if not 0.0 < pi < 1.0:
        raise InvalidInputError(f"routing probability must be in (0, 1), got {pi}")
    return float(factors.alpha_norm[layer] * pi)
