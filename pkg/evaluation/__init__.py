"""
Evaluation package for expert-skipping policies.
"""

from evaluation.metrics import (
    AblationResult,
    AblationRow,
    BenchResult,
    FGValue,
    ScaleResult,
    ScaleRow,
    SkipProfile,
    SweepResult,
    SweepRow,
)
from evaluation.runner import ForwardRunner, RunConfig, RunResult

__all__ = [
    "AblationResult",
    "AblationRow",
    "BenchResult",
    "FGValue",
    "ForwardRunner",
    "RunConfig",
    "RunResult",
    "ScaleResult",
    "ScaleRow",
    "SkipProfile",
    "SweepResult",
    "SweepRow",
]
