"""
Expert-skipping rules: global-factor calibration, dual-modality thresholds and baselines.
"""

from skipping.baselines import (
    BETA_GRID_SIZE,
    BetaSchedule,
    MassRulePolicy,
    ReducedKPolicy,
    beta_grid,
    calibrate_beta,
    mass_rule_skip,
    reduced_k_policy,
)
from skipping.dmt import (
    SKIP_NOTHING_TAU,
    DMTPolicy,
    ScoreMode,
    ThresholdPair,
    evaluate_fg,
    fg_from_run,
    skip_decision,
    skip_profile,
)
from skipping.gmlg import (
    CalibrationSet,
    GlobalFactors,
    calibrate_alpha,
    importance_score,
    kl_divergence,
    normalize_alpha,
)

__all__ = [
    "BETA_GRID_SIZE",
    "BetaSchedule",
    "CalibrationSet",
    "DMTPolicy",
    "GlobalFactors",
    "MassRulePolicy",
    "ReducedKPolicy",
    "SKIP_NOTHING_TAU",
    "ScoreMode",
    "ThresholdPair",
    "beta_grid",
    "calibrate_alpha",
    "calibrate_beta",
    "evaluate_fg",
    "fg_from_run",
    "importance_score",
    "kl_divergence",
    "mass_rule_skip",
    "normalize_alpha",
    "reduced_k_policy",
    "skip_decision",
    "skip_profile",
]
