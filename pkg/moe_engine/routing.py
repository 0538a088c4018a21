"""
Router math: softmax routing probabilities and top-k expert selection.

Both functions have a 1-D form (the public operations) and a row-wise form
used by the batched forward pass. The row-wise forms apply the identical
arithmetic to every row.
"""

import numpy as np

from moe_engine.errors import InvalidArgumentError, InvalidInputError


def route_probs(logits) -> np.ndarray:
    """Softmax of a router logit vector.

    Args:
        logits: Real vector of length M

    Returns:
        Probability vector of length M (positive entries summing to 1)
    """
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim != 1 or logits.size == 0:
        raise InvalidInputError(f"logits must be a non-empty vector, got shape {logits.shape}")
    if not np.all(np.isfinite(logits)):
        raise InvalidInputError("logits contain NaN or Inf")
    return softmax_rows(logits[None, :])[0]


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax for a (n, M) logit matrix."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=1, keepdims=True)


def select_topk(probs, k: int) -> np.ndarray:
    """Indices of the k largest probabilities.

    Ordered by descending probability; equal probabilities keep the lower
    expert index first.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise InvalidInputError(f"probs must be a vector, got shape {probs.shape}")
    if not 1 <= k <= probs.size:
        raise InvalidArgumentError(f"k must be in [1, {probs.size}], got {k}")
    return topk_rows(probs[None, :], k)[0]


def topk_rows(probs: np.ndarray, k: int) -> np.ndarray:
    # stable sort on the negated values keeps lower indices first among ties
    return np.argsort(-probs, axis=1, kind="stable")[:, :k]
