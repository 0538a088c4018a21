"""
Skip policies.

A policy turns the routing of one layer into a boolean skip mask over the
selected expert slots. Policies only ever mark slots that are already in
the top-k set, so a mask can never add compute.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from moe_engine.errors import InvalidInputError


@dataclass(frozen=True)
class SlotContext:
    """Routing of one layer for n flattened tokens."""
    layer: int
    probs: np.ndarray      # (n, k) routing probability of each selected slot, rank order
    selected: np.ndarray   # (n, k) expert index of each slot
    is_vision: np.ndarray  # (n,)
    positions: np.ndarray  # (n,) position of the token inside its sequence

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape


class SkipPolicy(ABC):
    """Decides which routed slots are skipped."""

    #: True when the policy can never skip anything
    skips_nothing: bool = False

    @abstractmethod
    def skip_mask(self, ctx: SlotContext) -> np.ndarray:
        """Boolean (n, k) mask, True where the slot is skipped."""

    def describe(self) -> str:
        return type(self).__name__


class NoSkip(SkipPolicy):
    """Default top-k forward."""

    skips_nothing = True

    def skip_mask(self, ctx: SlotContext) -> np.ndarray:
        return np.zeros(ctx.shape, dtype=bool)

    def describe(self) -> str:
        return "none"


class LayerAblation(SkipPolicy):
    """Skip every routed slot of one layer (zero FFN contribution there)."""

    def __init__(self, layer: int):
        self.layer = layer

    def skip_mask(self, ctx: SlotContext) -> np.ndarray:
        return np.full(ctx.shape, ctx.layer == self.layer, dtype=bool)

    def describe(self) -> str:
        return f"ablate-layer-{self.layer}"


class FixedMask(SkipPolicy):
    """Explicit (layer, position, slot) mask applied to every sequence of a batch."""

    def __init__(self, mask):
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 3:
            raise InvalidInputError(f"fixed mask must be (layers, positions, k), got shape {mask.shape}")
        self.mask = mask

    def skip_mask(self, ctx: SlotContext) -> np.ndarray:
        if ctx.positions.size and ctx.positions.max() >= self.mask.shape[1]:
            raise InvalidInputError("fixed mask is shorter than the sequence")
        if self.mask.shape[2] != ctx.shape[1]:
            raise InvalidInputError(f"fixed mask has {self.mask.shape[2]} slots, model routes {ctx.shape[1]}")
        return self.mask[ctx.layer][ctx.positions].copy()

    def describe(self) -> str:
        return "fixed-mask"
