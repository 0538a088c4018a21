"""
Reference skipping strategies: reduced-k routing and the probability-mass rule.

The mass rule generalizes top-2 skipping to top-k: ranks i..k are skipped
for the smallest i whose tail mass is strictly below beta times the total
routed mass. beta is calibrated layer by layer so that the cumulative
skipped fraction tracks a target ratio.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from evaluation.runner import ForwardRunner, RunConfig
from moe_engine.errors import InvalidArgumentError, InvalidInputError
from moe_engine.model import SyntheticMoEModel
from moe_engine.policies import SkipPolicy, SlotContext
from skipping.gmlg import CalibrationSet

logger = logging.getLogger(__name__)

BETA_GRID_SIZE = 101


def beta_grid(size: int = BETA_GRID_SIZE) -> np.ndarray:
    return np.linspace(0.0, 1.0, size)


@dataclass
class BetaSchedule:
    """One mass-rule beta per layer."""
    beta: np.ndarray
    model_hash: str = ""
    num_samples: int = 0
    seed: int = 0
    rho: float = 0.0

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=np.float64)
        if self.beta.ndim != 1:
            raise InvalidInputError("beta must be a vector")
        if np.any((self.beta < 0) | (self.beta > 1)):
            raise InvalidInputError("every beta must lie in [0, 1]")

    @property
    def num_layers(self) -> int:
        return int(self.beta.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, BetaSchedule):
            return NotImplemented
        return (
            np.array_equal(self.beta, other.beta)
            and (self.model_hash, self.num_samples, self.seed, self.rho)
            == (other.model_hash, other.num_samples, other.seed, other.rho)
        )


class ReducedKPolicy(SkipPolicy):
    """Keep the top k' ranks of every top-k selection."""

    def __init__(self, k_prime: int):
        self.k_prime = k_prime

    def skip_mask(self, ctx: SlotContext) -> np.ndarray:
        n, k = ctx.shape
        return np.broadcast_to(np.arange(k) >= self.k_prime, (n, k)).copy()

    def describe(self) -> str:
        return f"reduced-k(k'={self.k_prime})"


def reduced_k_policy(model: SyntheticMoEModel, k_prime: int) -> ReducedKPolicy:
    k = model.spec.top_k
    if not 1 <= k_prime <= k:
        raise InvalidArgumentError(f"k' must be in [1, {k}], got {k_prime}")
    return ReducedKPolicy(k_prime)


def mass_rule_skip(probs, beta: float) -> tuple[int, ...]:
    """Skipped 1-based ranks for one token's descending routed probabilities.

    Returns (i, ..., k) for the smallest i with
    sum(probs[i-1:]) < beta * sum(probs), or () when no i qualifies.
    """
    probs = np.asarray(probs, dtype=np.float64)
    mask = mass_rule_rows(probs[None, :], beta)[0]
    return tuple(int(r) + 1 for r in np.flatnonzero(mask))


def mass_rule_rows(probs: np.ndarray, beta) -> np.ndarray:
    """(n, k) skip mask of the mass rule; beta is a scalar or per-row vector."""
    beta = np.asarray(beta, dtype=np.float64)
    if np.any((beta < 0) | (beta > 1)):
        raise InvalidArgumentError(f"beta must be in [0, 1], got {beta}")
    tail = np.cumsum(probs[:, ::-1], axis=1)[:, ::-1]
    total = tail[:, :1]
    qualifies = tail < beta.reshape(-1, 1) * total
    # the tail sums shrink with the rank, so every rank after the first qualifying one qualifies too
    return np.logical_or.accumulate(qualifies, axis=1)


class MassRulePolicy(SkipPolicy):
    """Probability-mass skipping with a per-layer beta."""

    def __init__(self, beta):
        self.beta = np.asarray(beta, dtype=np.float64)

    def skip_mask(self, ctx: SlotContext) -> np.ndarray:
        return mass_rule_rows(ctx.probs, self.beta[ctx.layer])

    def describe(self) -> str:
        return "mass-rule(beta=[" + ", ".join(f"{b:.2f}" for b in self.beta) + "])"


def calibrate_beta(
    model: SyntheticMoEModel,
    calibration: CalibrationSet,
    rho: float,
    config: Optional[RunConfig] = None,
    grid: Optional[np.ndarray] = None,
    runner: Optional[ForwardRunner] = None,
) -> BetaSchedule:
    """Layer-by-layer beta search from the first to the last layer.

    For layer l, every beta on the grid is tried with earlier layers fixed and
    later layers not skipping; the chosen beta gives the largest cumulative
    skipped fraction over layers 0..l that does not exceed rho (ties go to
    the smaller beta).
    """
    if not 0.0 < rho < 1.0:
        raise InvalidArgumentError(f"rho must be in (0, 1), got {rho}")
    grid = beta_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    runner = runner or ForwardRunner(model, calibration.samples, config)
    schedule = np.zeros(model.spec.num_layers, dtype=np.float64)

    for layer in range(model.spec.num_layers):
        best_beta, best_g = 0.0, -1.0
        for beta in grid:
            trial = schedule.copy()
            trial[layer] = beta
            cumulative = runner.skip_stats(MassRulePolicy(trial)).cumulative_g(layer)
            if best_g < cumulative <= rho:
                best_beta, best_g = float(beta), cumulative
        schedule[layer] = best_beta
        logger.info("layer %d: beta=%.2f cumulative g=%.4f", layer, best_beta, best_g)

    return BetaSchedule(
        beta=schedule,
        model_hash=model.fingerprint(),
        num_samples=len(calibration),
        seed=calibration.seed or 0,
        rho=rho,
    )
