"""
Inference FLOP accounting.

Counts multiply-adds as two FLOPs. Mixing, router and head costs do not
depend on skipping; the expert component scales with the number of expert
evaluations, i.e. routed - skipped slots.
"""

from dataclasses import dataclass

from moe_engine.model import ModelSpec
from moe_engine.stats import SkipStats


@dataclass(frozen=True)
class FlopReport:
    baseline_flops: int
    skipped_flops: int
    expert_baseline_flops: int
    expert_skipped_flops: int

    @property
    def saved_flops(self) -> int:
        return self.baseline_flops - self.skipped_flops

    @property
    def expert_savings(self) -> float:
        """Fraction of expert FLOPs removed by skipping."""
        if self.expert_baseline_flops == 0:
            return 0.0
        return 1.0 - self.expert_skipped_flops / self.expert_baseline_flops

    @property
    def total_savings(self) -> float:
        if self.baseline_flops == 0:
            return 0.0
        return self.saved_flops / self.baseline_flops

    def to_dict(self) -> dict:
        return {
            "baseline_flops": self.baseline_flops,
            "skipped_flops": self.skipped_flops,
            "expert_baseline_flops": self.expert_baseline_flops,
            "expert_skipped_flops": self.expert_skipped_flops,
            "expert_savings": self.expert_savings,
            "total_savings": self.total_savings,
        }


def expert_flops(spec: ModelSpec) -> int:
    """FLOPs of one expert evaluation (two matrix-vector products)."""
    return 2 * spec.hidden_dim * spec.ffn_dim * 2


def dense_token_flops(spec: ModelSpec) -> int:
    """Per-token, per-layer FLOPs outside the experts: mixing matvec, running mean, router."""
    d = spec.hidden_dim
    return 2 * d * d + d + 2 * d * spec.experts_per_layer


def head_flops(spec: ModelSpec) -> int:
    return 2 * spec.hidden_dim * spec.vocab_size


def flop_count(spec: ModelSpec, stats: SkipStats) -> FlopReport:
    """Baseline (no-skip) and skipping FLOPs for the tokens counted in ``stats``."""
    dense = (
        stats.num_tokens * spec.num_layers * dense_token_flops(spec)
        + stats.num_sequences * head_flops(spec)
    )
    per_expert = expert_flops(spec)
    expert_baseline = per_expert * stats.routed_total
    expert_skipped = per_expert * (stats.routed_total - stats.skipped_total)
    return FlopReport(
        baseline_flops=dense + expert_baseline,
        skipped_flops=dense + expert_skipped,
        expert_baseline_flops=expert_baseline,
        expert_skipped_flops=expert_skipped,
    )
