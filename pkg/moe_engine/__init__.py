"""
Deterministic synthetic Mixture-of-Experts engine with pluggable expert-skip policies.
"""

from moe_engine.errors import ContractViolation, InvalidArgumentError, InvalidInputError
from moe_engine.flops import FlopReport, flop_count
from moe_engine.model import (
    BatchForward,
    ForwardResult,
    LayerOutput,
    ModelSpec,
    ModelWeights,
    RoutingDecision,
    RoutingMode,
    RoutingTrace,
    SyntheticMoEModel,
    build_synthetic_model,
    model_forward,
)
from moe_engine.policies import FixedMask, LayerAblation, NoSkip, SkipPolicy, SlotContext
from moe_engine.routing import route_probs, select_topk
from moe_engine.stats import SkipStats
from moe_engine.tokens import MODALITIES, Modality, SequenceBatch, Token, TokenSequence

__all__ = [
    "BatchForward",
    "ContractViolation",
    "FixedMask",
    "FlopReport",
    "ForwardResult",
    "InvalidArgumentError",
    "InvalidInputError",
    "LayerAblation",
    "LayerOutput",
    "MODALITIES",
    "Modality",
    "ModelSpec",
    "ModelWeights",
    "NoSkip",
    "RoutingDecision",
    "RoutingMode",
    "RoutingTrace",
    "SequenceBatch",
    "SkipPolicy",
    "SkipStats",
    "SlotContext",
    "SyntheticMoEModel",
    "Token",
    "TokenSequence",
    "build_synthetic_model",
    "flop_count",
    "model_forward",
    "route_probs",
    "select_topk",
]
