"""Token and sequence types with their modality tags."""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from moe_engine.errors import InvalidInputError


class Modality(str, Enum):
    TEXT = "text"
    VISION = "vision"

    @property
    def column(self) -> int:
        """Column used for this modality in per-modality count arrays."""
        return 0 if self is Modality.TEXT else 1


MODALITIES = (Modality.TEXT, Modality.VISION)


@dataclass(frozen=True)
class Token:
    """A single input token. The modality never changes across layers."""
    modality: Modality
    embed_index: int


class TokenSequence:
    """Ordered tokens stored as two parallel arrays."""

    def __init__(self, embed_indices, is_vision):
        self.embed_indices = np.array(embed_indices, dtype=np.int64).reshape(-1)
        self.is_vision = np.array(is_vision, dtype=bool).reshape(-1)
        if self.embed_indices.shape != self.is_vision.shape:
            raise InvalidInputError("embed_indices and is_vision must have the same length")
        self.embed_indices.setflags(write=False)
        self.is_vision.setflags(write=False)

    @classmethod
    def from_tokens(cls, tokens: Iterable[Token]) -> "TokenSequence":
        tokens = list(tokens)
        return cls(
            [t.embed_index for t in tokens],
            [t.modality is Modality.VISION for t in tokens],
        )

    @property
    def tokens(self) -> list[Token]:
        return [
            Token(Modality.VISION if v else Modality.TEXT, int(i))
            for i, v in zip(self.embed_indices, self.is_vision)
        ]

    def __len__(self) -> int:
        return int(self.embed_indices.size)

    def __eq__(self, other) -> bool:
        if not isinstance(other, TokenSequence):
            return NotImplemented
        return (
            np.array_equal(self.embed_indices, other.embed_indices)
            and np.array_equal(self.is_vision, other.is_vision)
        )

    def __repr__(self) -> str:
        return f"TokenSequence(len={len(self)}, vision={int(self.is_vision.sum())})"


@dataclass(frozen=True)
class SequenceBatch:
    """Equal-length sequences stacked for a batched forward pass."""
    embed_indices: np.ndarray  # (B, T)
    is_vision: np.ndarray      # (B, T)

    @classmethod
    def stack(cls, sequences: list[TokenSequence]) -> "SequenceBatch":
        if not sequences:
            raise InvalidInputError("cannot batch zero sequences")
        lengths = {len(s) for s in sequences}
        if len(lengths) != 1:
            raise InvalidInputError(f"batched sequences must share one length, got {sorted(lengths)}")
        if 0 in lengths:
            raise InvalidInputError("sequence is empty")
        return cls(
            np.stack([s.embed_indices for s in sequences]),
            np.stack([s.is_vision for s in sequences]),
        )

    @property
    def batch_size(self) -> int:
        return int(self.embed_indices.shape[0])

    @property
    def length(self) -> int:
        return int(self.embed_indices.shape[1])
