"""
Dual-modality thresholding.

A routed expert is skipped when its importance score falls strictly below
the threshold of the token's modality. This module applies that rule and
measures the objective f (average KL to the unmodified model) and the
constraint g (fraction of routed slots skipped) on a calibration set.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from evaluation.metrics import FGValue, SkipProfile
from evaluation.runner import ForwardRunner, RunConfig, RunResult
from moe_engine.errors import InvalidInputError
from moe_engine.model import SyntheticMoEModel
from moe_engine.policies import SkipPolicy, SlotContext
from moe_engine.tokens import Modality
from skipping.gmlg import CalibrationSet, GlobalFactors, kl_rows

logger = logging.getLogger(__name__)

# smallest positive double: no strictly positive score falls below it
SKIP_NOTHING_TAU = float(np.nextafter(0.0, 1.0))


class ScoreMode(str, Enum):
    """How a routed slot is scored before thresholding."""
    GMLG = "gmlg"    # alpha_norm[l] * pi
    LOCAL = "local"  # pi alone


@dataclass(frozen=True)
class ThresholdPair:
    tau_text: float
    tau_vision: float

    def __post_init__(self):
        for name in ("tau_text", "tau_vision"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise InvalidInputError(f"{name} must be in (0, 1), got {value}")

    @classmethod
    def single(cls, tau: float) -> "ThresholdPair":
        return cls(tau, tau)

    @classmethod
    def skip_nothing(cls) -> "ThresholdPair":
        return cls(SKIP_NOTHING_TAU, SKIP_NOTHING_TAU)

    def for_modality(self, modality: Modality) -> float:
        return self.tau_vision if modality is Modality.VISION else self.tau_text


def skip_decision(score: float, modality: Modality, thresholds: ThresholdPair) -> bool:
    """True iff the slot is skipped: score < tau of the token's modality."""
    return bool(score < thresholds.for_modality(modality))


class DMTPolicy(SkipPolicy):
    """Skip routed slots whose score is below their modality's threshold."""

    def __init__(
        self,
        thresholds: ThresholdPair,
        factors: Optional[GlobalFactors] = None,
        score_mode: ScoreMode = ScoreMode.GMLG,
    ):
        if score_mode is ScoreMode.GMLG and factors is None:
            raise InvalidInputError("GMLG scoring needs global factors")
        self.thresholds = thresholds
        self.factors = factors
        self.score_mode = ScoreMode(score_mode)

    def scores(self, ctx: SlotContext) -> np.ndarray:
        if self.score_mode is ScoreMode.LOCAL:
            return ctx.probs
        return self.factors.alpha_norm[ctx.layer] * ctx.probs

    def skip_mask(self, ctx: SlotContext) -> np.ndarray:
        tau = np.where(ctx.is_vision, self.thresholds.tau_vision, self.thresholds.tau_text)
        return self.scores(ctx) < tau[:, None]

    def describe(self) -> str:
        return (
            f"dmt[{self.score_mode.value}](tau_text={self.thresholds.tau_text:.6g}, "
            f"tau_vision={self.thresholds.tau_vision:.6g})"
        )


def fg_from_run(reference: RunResult, run: RunResult) -> FGValue:
    """f and g of a skipping run against the reference run on the same samples."""
    f = float(np.mean(kl_rows(reference.distributions, run.distributions)))
    return FGValue(f=f, g=run.stats.g)


def evaluate_fg(
    model: SyntheticMoEModel,
    factors: GlobalFactors,
    calibration: CalibrationSet,
    thresholds: ThresholdPair,
    config: Optional[RunConfig] = None,
    score_mode: ScoreMode = ScoreMode.GMLG,
    runner: Optional[ForwardRunner] = None,
) -> FGValue:
    """Average KL to the unmodified model (f) and skipped fraction (g)."""
    runner = runner or ForwardRunner(model, calibration.samples, config)
    run = runner.run(DMTPolicy(thresholds, factors, score_mode))
    return fg_from_run(runner.reference(), run)


def skip_profile(
    model: SyntheticMoEModel,
    factors: GlobalFactors,
    calibration: CalibrationSet,
    thresholds: ThresholdPair,
    config: Optional[RunConfig] = None,
    score_mode: ScoreMode = ScoreMode.GMLG,
    runner: Optional[ForwardRunner] = None,
) -> SkipProfile:
    """Skipped/routed table per (layer, modality) with an OVERALL row."""
    runner = runner or ForwardRunner(model, calibration.samples, config)
    stats = runner.skip_stats(DMTPolicy(thresholds, factors, score_mode))
    return SkipProfile.from_stats(stats)
