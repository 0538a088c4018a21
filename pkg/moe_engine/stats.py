"""Routed/skipped expert-slot counters."""

from dataclasses import dataclass

import numpy as np

from moe_engine.tokens import MODALITIES


@dataclass
class SkipStats:
    """Per-layer, per-modality counts of routed and skipped expert slots.

    Column 0 holds text tokens, column 1 vision tokens.
    """
    routed: np.ndarray
    skipped: np.ndarray
    num_tokens: int = 0
    num_sequences: int = 0

    @classmethod
    def empty(cls, num_layers: int) -> "SkipStats":
        return cls(
            routed=np.zeros((num_layers, len(MODALITIES)), dtype=np.int64),
            skipped=np.zeros((num_layers, len(MODALITIES)), dtype=np.int64),
        )

    @property
    def num_layers(self) -> int:
        return int(self.routed.shape[0])

    @property
    def routed_total(self) -> int:
        return int(self.routed.sum())

    @property
    def skipped_total(self) -> int:
        return int(self.skipped.sum())

    @property
    def g(self) -> float:
        """Fraction of routed slots that were skipped."""
        routed = self.routed_total
        if routed == 0:
            return 0.0
        return self.skipped_total / routed

    def layer_ratios(self) -> np.ndarray:
        """skipped / routed per (layer, modality); 0 where nothing was routed."""
        ratios = np.zeros(self.routed.shape, dtype=np.float64)
        np.divide(self.skipped, self.routed, out=ratios, where=self.routed > 0)
        return ratios

    def cumulative_g(self, through_layer: int) -> float:
        """Skipped fraction pooled over layers 0..through_layer."""
        routed = int(self.routed[: through_layer + 1].sum())
        if routed == 0:
            return 0.0
        return int(self.skipped[: through_layer + 1].sum()) / routed

    def merge(self, other: "SkipStats") -> "SkipStats":
        return SkipStats(
            routed=self.routed + other.routed,
            skipped=self.skipped + other.skipped,
            num_tokens=self.num_tokens + other.num_tokens,
            num_sequences=self.num_sequences + other.num_sequences,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, SkipStats):
            return NotImplemented
        return (
            np.array_equal(self.routed, other.routed)
            and np.array_equal(self.skipped, other.skipped)
            and self.num_tokens == other.num_tokens
            and self.num_sequences == other.num_sequences
        )
