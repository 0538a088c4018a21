"""
Forward Runner for Calibration Sets

Runs the synthetic model over a set of sequences under a skip policy.
Sequences are grouped into fixed-size chunks of equal length; chunks run
on a thread pool and results are joined back in sample order, so the
output never depends on the number of workers.
"""

import logging
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from moe_engine.model import BatchForward, RoutingMode, SyntheticMoEModel
from moe_engine.policies import NoSkip, SkipPolicy
from moe_engine.stats import SkipStats
from moe_engine.tokens import SequenceBatch, TokenSequence

logger = logging.getLogger(__name__)


def default_threads() -> int:
    return os.cpu_count() or 1


@dataclass
class RunConfig:
    """Execution settings shared by every forward sweep."""
    threads: int = 1
    batch_size: int = 64
    routing: RoutingMode = RoutingMode.FROZEN

    def __post_init__(self):
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        self.routing = RoutingMode(self.routing)


@dataclass
class RunResult:
    """Result of one policy over every sample."""
    distributions: np.ndarray  # (N, V), sample order
    stats: SkipStats
    expert_evals: int

    @property
    def g(self) -> float:
        return self.stats.g


def plan_chunks(samples: Sequence[TokenSequence], batch_size: int) -> list[tuple[int, int]]:
    """Split sample indices into consecutive runs of equal length, at most batch_size long."""
    chunks = []
    start = 0
    while start < len(samples):
        stop = start + 1
        length = len(samples[start])
        while stop < len(samples) and stop - start < batch_size and len(samples[stop]) == length:
            stop += 1
        chunks.append((start, stop))
        start = stop
    return chunks


class ForwardRunner:
    """Batched, order-stable forward passes of one model over one sample set.

    The skip-free reference pass (distributions and routing trace) is computed
    once and cached; FROZEN routing reuses its trace for every skipping pass.
    """

    def __init__(
        self,
        model: SyntheticMoEModel,
        samples: Sequence[TokenSequence],
        config: Optional[RunConfig] = None,
    ):
        if len(samples) == 0:
            raise ValueError("sample set is empty")
        self.model = model
        self.samples = samples
        self.config = config or RunConfig()
        self._chunks = plan_chunks(samples, self.config.batch_size)
        self._batches = [SequenceBatch.stack(list(samples[a:b])) for a, b in self._chunks]
        self._reference: Optional[list[BatchForward]] = None
        self._lock = threading.Lock()

    @property
    def num_samples(self) -> int:
        return len(self.samples)

    def _map(self, fn, items: list) -> list:
        if self.config.threads == 1 or len(items) == 1:
            return [fn(item) for item in items]
        with ThreadPoolExecutor(max_workers=self.config.threads) as pool:
            return list(pool.map(fn, items))

    def _reference_chunks(self) -> list[BatchForward]:
        with self._lock:
            if self._reference is None:
                logger.debug("computing reference pass over %d samples", self.num_samples)
                self._reference = self._map(self.model.trace_routing, self._batches)
            return self._reference

    def _join(self, outputs: list[BatchForward]) -> RunResult:
        stats = SkipStats.empty(self.model.spec.num_layers)
        for out in outputs:
            stats = stats.merge(out.stats)
        return RunResult(
            distributions=np.concatenate([out.distributions for out in outputs], axis=0),
            stats=stats,
            expert_evals=sum(out.expert_evals for out in outputs),
        )

    def reference(self) -> RunResult:
        """Skip-free distributions and statistics."""
        return self._join(self._reference_chunks())

    def run(self, policy: SkipPolicy) -> RunResult:
        """Forward every sample under ``policy``."""
        if policy.skips_nothing:
            return self.reference()
        if self.config.routing is RoutingMode.FROZEN:
            reference = self._reference_chunks()

            def forward(i: int) -> BatchForward:
                return self.model.forward_batch(self._batches[i], policy, trace=reference[i].trace)
        else:
            def forward(i: int) -> BatchForward:
                return self.model.forward_batch(self._batches[i], policy)

        return self._join(self._map(forward, list(range(len(self._batches)))))

    def skip_stats(self, policy: SkipPolicy) -> SkipStats:
        """Skip counts of ``policy``; under FROZEN routing no expert is evaluated."""
        if self.config.routing is RoutingMode.LIVE:
            return self.run(policy).stats
        reference = self._reference_chunks()
        stats = SkipStats.empty(self.model.spec.num_layers)
        for batch, out in zip(self._batches, reference):
            stats = stats.merge(self.model.skip_stats_from_trace(batch, out.trace, policy))
        return stats
