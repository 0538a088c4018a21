"""
Synthetic Mixture-of-Experts model.

Each layer is a token-wise causal mixing step (a stand-in for attention)
followed by a routed MoE FFN, both with residual connections. An embedding
table feeds the first layer and a linear head with softmax produces the
next-token distribution at the final position.

Expert m of layer l computes  W_out[l, m] @ tanh(W_in[l, m] @ rms(x)),
and the MoE output is  x + sum over kept slots of  pi_m * Expert_m(x).
Skipped slots drop their term; the remaining weights are not renormalized.
"""

import hashlib
import logging
from dataclasses import astuple, dataclass, fields
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from moe_engine.errors import ContractViolation, InvalidArgumentError, InvalidInputError
from moe_engine.policies import NoSkip, SkipPolicy, SlotContext
from moe_engine.routing import softmax_rows, topk_rows
from moe_engine.seeds import make_rng
from moe_engine.stats import SkipStats
from moe_engine.tokens import Modality, SequenceBatch, TokenSequence

logger = logging.getLogger(__name__)

RMS_EPS = 1e-6


class RoutingMode(str, Enum):
    """Where a skipping forward pass reads its router decisions from.

    FROZEN reuses the routing of the skip-free reference pass, so every skip
    decision depends only on (reference routing, policy). LIVE routes on the
    modified residual stream.
    """
    FROZEN = "frozen"
    LIVE = "live"


@dataclass(frozen=True)
class ModelSpec:
    num_layers: int
    experts_per_layer: int
    top_k: int
    hidden_dim: int
    ffn_dim: int
    vocab_size: int
    seed: int
    text_router_temperature: float = 1.0
    vision_router_temperature: float = 1.0

    def __post_init__(self):
        for name in ("num_layers", "experts_per_layer", "top_k", "hidden_dim", "ffn_dim", "vocab_size"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidArgumentError(f"{name} must be a positive integer, got {value}")
        if self.top_k > self.experts_per_layer:
            raise InvalidArgumentError(
                f"top_k ({self.top_k}) cannot exceed experts_per_layer ({self.experts_per_layer})"
            )
        if not 0 <= self.seed < 2**64:
            raise InvalidArgumentError(f"seed must be an unsigned 64-bit integer, got {self.seed}")
        for name in ("text_router_temperature", "vision_router_temperature"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise InvalidArgumentError(f"{name} must be positive, got {value}")

    def weight_shapes(self) -> dict[str, tuple[int, ...]]:
        """Shapes of the weight blocks, in declaration (and file) order."""
        L, M, d, f, V = self.num_layers, self.experts_per_layer, self.hidden_dim, self.ffn_dim, self.vocab_size
        return {
            "embedding": (V, d),
            "mixing": (L, d, d),
            "router": (L, M, d),
            "w_in": (L, M, f, d),
            "w_out": (L, M, d, f),
            "head": (V, d),
        }


@dataclass(frozen=True)
class ModelWeights:
    embedding: np.ndarray
    mixing: np.ndarray
    router: np.ndarray
    w_in: np.ndarray
    w_out: np.ndarray
    head: np.ndarray

    def blocks(self) -> list[tuple[str, np.ndarray]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


@dataclass(frozen=True)
class RoutingDecision:
    logits: np.ndarray
    probs: np.ndarray
    selected: np.ndarray


@dataclass(frozen=True)
class RoutingTrace:
    """Per-layer routing of a batch: probs and selected experts, each (n, k)."""
    probs: tuple[np.ndarray, ...]
    selected: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class LayerOutput:
    hidden: np.ndarray
    routing: RoutingDecision
    expert_evals: int


@dataclass(frozen=True)
class BatchForward:
    distributions: np.ndarray  # (B, V)
    stats: SkipStats
    expert_evals: int
    trace: Optional[RoutingTrace] = None


@dataclass(frozen=True)
class ForwardResult:
    distribution: np.ndarray  # (V,)
    stats: SkipStats
    expert_evals: int


def rms_norm(x: np.ndarray) -> np.ndarray:
    return x / np.sqrt(np.mean(x * x, axis=-1, keepdims=True) + RMS_EPS)


class SyntheticMoEModel:
    """Immutable seeded MoE model; all forward methods are pure."""

    def __init__(self, spec: ModelSpec, weights: ModelWeights):
        shapes = spec.weight_shapes()
        for name, block in weights.blocks():
            if block.shape != shapes[name]:
                raise InvalidInputError(f"weight block {name} has shape {block.shape}, expected {shapes[name]}")
            if block.dtype != np.float64:
                raise InvalidInputError(f"weight block {name} must be float64, got {block.dtype}")
            block.setflags(write=False)
        self.spec = spec
        self.weights = weights

    def fingerprint(self) -> str:
        """Short content hash of the spec and every weight block."""
        digest = hashlib.sha256(repr(astuple(self.spec)).encode("utf-8"))
        for _, block in self.weights.blocks():
            digest.update(np.ascontiguousarray(block).tobytes())
        return digest.hexdigest()[:16]

    # ------------------------------------------------------------------
    # Router and expert primitives
    # ------------------------------------------------------------------

    def _route(self, x: np.ndarray, layer: int, temperatures: np.ndarray) -> RoutingDecision:
        logits = (rms_norm(x) @ self.weights.router[layer].T) / temperatures[:, None]
        probs = softmax_rows(logits)
        selected = topk_rows(probs, self.spec.top_k)
        return RoutingDecision(logits=logits, probs=probs, selected=selected)

    def _temperatures(self, is_vision: np.ndarray) -> np.ndarray:
        return np.where(
            is_vision, self.spec.vision_router_temperature, self.spec.text_router_temperature
        ).astype(np.float64)

    def _apply_experts(
        self,
        x: np.ndarray,
        layer: int,
        selected: np.ndarray,
        weights: np.ndarray,
        skip: np.ndarray,
    ) -> tuple[np.ndarray, int]:
        """Residual MoE update for n tokens; returns (new hidden, experts evaluated)."""
        n, k = selected.shape
        normed = rms_norm(x)
        contrib = np.zeros((n, k, self.spec.hidden_dim), dtype=np.float64)
        active = ~skip
        for expert in np.unique(selected[active]):
            rows, slots = np.nonzero((selected == expert) & active)
            hidden = np.tanh(normed[rows] @ self.weights.w_in[layer, expert].T)
            out = hidden @ self.weights.w_out[layer, expert].T
            contrib[rows, slots] = weights[rows, slots, None] * out
        # slots are summed in rank order; skipped slots hold exact zeros
        return x + contrib.sum(axis=1), int(active.sum())

    # ------------------------------------------------------------------
    # Forward passes
    # ------------------------------------------------------------------

    def moe_layer_forward(
        self,
        x,
        layer_index: int,
        skip_slots: Iterable[int] = (),
        modality: Modality = Modality.TEXT,
    ) -> LayerOutput:
        """One MoE FFN step for a single hidden state.

        Args:
            x: Hidden state of length d (the MoE input of this layer)
            layer_index: Layer in [0, L)
            skip_slots: Expert indices to skip; each must be among the selected top-k
            modality: Token modality (selects the router temperature)

        Returns:
            LayerOutput with the new hidden state, the routing decision and the
            number of experts actually evaluated
        """
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.spec.hidden_dim,):
            raise InvalidInputError(f"hidden state must have shape ({self.spec.hidden_dim},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("hidden state contains NaN or Inf")
        if not 0 <= layer_index < self.spec.num_layers:
            raise InvalidArgumentError(f"layer_index must be in [0, {self.spec.num_layers}), got {layer_index}")

        is_vision = np.array([modality is Modality.VISION])
        decision = self._route(x[None, :], layer_index, self._temperatures(is_vision))
        selected = decision.selected
        skip_slots = set(int(s) for s in skip_slots)
        unknown = skip_slots - set(int(e) for e in selected[0])
        if unknown:
            raise ContractViolation(f"skip slots {sorted(unknown)} are not in the selected set {selected[0].tolist()}")

        skip = np.isin(selected, sorted(skip_slots))
        weights = np.take_along_axis(decision.probs, selected, axis=1)
        hidden, evals = self._apply_experts(x[None, :], layer_index, selected, weights, skip)
        routing = RoutingDecision(decision.logits[0], decision.probs[0], selected[0])
        return LayerOutput(hidden=hidden[0], routing=routing, expert_evals=evals)

    def forward_batch(
        self,
        batch: SequenceBatch,
        policy: SkipPolicy,
        trace: Optional[RoutingTrace] = None,
        record_trace: bool = False,
    ) -> BatchForward:
        """Forward a batch of equal-length sequences under a skip policy.

        When ``trace`` is given the router is not evaluated; the recorded
        probabilities and selections are used instead.
        """
        spec = self.spec
        B, T = batch.batch_size, batch.length
        L, k, d = spec.num_layers, spec.top_k, spec.hidden_dim
        n = B * T
        if trace is not None and (len(trace.probs) != L or trace.probs[0].shape != (n, k)):
            raise ContractViolation("routing trace does not match this batch")

        is_vision = batch.is_vision.reshape(n)
        positions = np.tile(np.arange(T), B)
        temperatures = self._temperatures(is_vision)
        counts = np.arange(1, T + 1, dtype=np.float64)[None, :, None]

        stats = SkipStats.empty(L)
        stats.num_tokens = n
        stats.num_sequences = B
        evals = 0
        trace_probs, trace_selected = [], []

        H = self.weights.embedding[batch.embed_indices]
        for layer in range(L):
            context = np.cumsum(rms_norm(H), axis=1) / counts
            H = H + context @ self.weights.mixing[layer].T
            X = H.reshape(n, d)

            if trace is None:
                decision = self._route(X, layer, temperatures)
                selected = decision.selected
                probs = np.take_along_axis(decision.probs, selected, axis=1)
            else:
                probs, selected = trace.probs[layer], trace.selected[layer]
            if record_trace:
                trace_probs.append(probs)
                trace_selected.append(selected)

            skip = np.asarray(policy.skip_mask(SlotContext(layer, probs, selected, is_vision, positions)))
            if skip.shape != (n, k) or skip.dtype != bool:
                raise ContractViolation(f"{policy.describe()} returned a mask of shape {skip.shape}")

            X, layer_evals = self._apply_experts(X, layer, selected, probs, skip)
            evals += layer_evals
            tally_layer(stats, layer, skip, is_vision)

            if not np.all(np.isfinite(X)):
                raise ContractViolation(f"non-finite hidden state after layer {layer}")
            H = X.reshape(B, T, d)

        logits = rms_norm(H[:, -1, :]) @ self.weights.head.T
        recorded = RoutingTrace(tuple(trace_probs), tuple(trace_selected)) if record_trace else None
        return BatchForward(softmax_rows(logits), stats, evals, recorded)

    def trace_routing(self, batch: SequenceBatch) -> BatchForward:
        """Skip-free forward that also records the routing of every layer."""
        return self.forward_batch(batch, NoSkip(), record_trace=True)

    def skip_stats_from_trace(self, batch: SequenceBatch, trace: RoutingTrace, policy: SkipPolicy) -> SkipStats:
        """Skip counts of ``policy`` under frozen routing, without running experts.

        Equal to ``forward_batch(batch, policy, trace=trace).stats``.
        """
        B, T = batch.batch_size, batch.length
        n = B * T
        is_vision = batch.is_vision.reshape(n)
        positions = np.tile(np.arange(T), B)
        stats = SkipStats.empty(self.spec.num_layers)
        stats.num_tokens = n
        stats.num_sequences = B
        for layer in range(self.spec.num_layers):
            ctx = SlotContext(layer, trace.probs[layer], trace.selected[layer], is_vision, positions)
            tally_layer(stats, layer, np.asarray(policy.skip_mask(ctx)), is_vision)
        return stats


def tally_layer(stats: SkipStats, layer: int, skip: np.ndarray, is_vision: np.ndarray) -> None:
    """Add one layer's routed/skipped slot counts to ``stats``."""
    k = skip.shape[1]
    is_text = ~is_vision
    stats.routed[layer, 0] = int(is_text.sum()) * k
    stats.routed[layer, 1] = int(is_vision.sum()) * k
    stats.skipped[layer, 0] = int(skip[is_text].sum())
    stats.skipped[layer, 1] = int(skip[is_vision].sum())


def build_synthetic_model(spec: ModelSpec) -> SyntheticMoEModel:
    """Draw every weight block from the seeded generators of ``spec``.

    Blocks are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]. Routers come from
    their own substream so router statistics can be tuned without touching
    the other weights.
    """
    rng = make_rng(spec.seed, "weights")
    router_rng = make_rng(spec.seed, "router")
    shapes = spec.weight_shapes()
    fan_in = {
        "embedding": spec.hidden_dim,
        "mixing": spec.hidden_dim,
        "router": spec.hidden_dim,
        "w_in": spec.hidden_dim,
        "w_out": spec.ffn_dim,
        "head": spec.hidden_dim,
    }
    blocks = {}
    for name, shape in shapes.items():
        bound = 1.0 / np.sqrt(fan_in[name])
        source = router_rng if name == "router" else rng
        blocks[name] = source.uniform(-bound, bound, size=shape)
    logger.debug("built synthetic model L=%d M=%d k=%d", spec.num_layers, spec.experts_per_layer, spec.top_k)
    return SyntheticMoEModel(spec, ModelWeights(**blocks))


def model_forward(
    model: SyntheticMoEModel,
    seq: TokenSequence,
    policy: Optional[SkipPolicy] = None,
    routing: RoutingMode = RoutingMode.FROZEN,
) -> ForwardResult:
    """Next-token distribution at the last position plus skip statistics."""
    if len(seq) == 0:
        raise InvalidInputError("sequence is empty")
    policy = policy or NoSkip()
    batch = SequenceBatch.stack([seq])
    trace = None
    if routing is RoutingMode.FROZEN and not policy.skips_nothing:
        trace = model.trace_routing(batch).trace
    out = model.forward_batch(batch, policy, trace=trace)
    return ForwardResult(out.distributions[0], out.stats, out.expert_evals)
