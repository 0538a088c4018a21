"""
Threshold objective backed by the model.

Maps 1-based grid pairs (q, p) to f (average KL to the unmodified model) and
g (skipped fraction) for DMT thresholds (tau(q), tau(p)).
"""

import threading
from typing import Optional

from evaluation.runner import ForwardRunner
from moe_engine.model import RoutingMode
from search.grid import Grid
from skipping.dmt import DMTPolicy, ScoreMode, ThresholdPair, fg_from_run
from skipping.gmlg import GlobalFactors


class ThresholdObjective:
    """f and g of DMT skipping at grid pair (q, p).

    Under FROZEN routing g is counted from the reference routing trace and
    needs no expert evaluation; f always runs the skipping forward. Under
    LIVE routing one forward serves both, so its result is cached.
    """

    def __init__(
        self,
        runner: ForwardRunner,
        factors: Optional[GlobalFactors],
        grid: Grid,
        score_mode: ScoreMode = ScoreMode.GMLG,
    ):
        self.runner = runner
        self.factors = factors
        self.grid = grid
        self.score_mode = ScoreMode(score_mode)
        self._live: dict[tuple[int, int], tuple[float, float]] = {}
        self._lock = threading.Lock()

    @property
    def size(self) -> int:
        return self.grid.size

    def thresholds(self, q: int, p: int) -> ThresholdPair:
        return ThresholdPair(self.grid.tau(q), self.grid.tau(p))

    def policy(self, q: int, p: int) -> DMTPolicy:
        return DMTPolicy(self.thresholds(q, p), self.factors, self.score_mode)

    def _fg(self, q: int, p: int) -> tuple[float, float]:
        with self._lock:
            if (q, p) in self._live:
                return self._live[(q, p)]
        value = fg_from_run(self.runner.reference(), self.runner.run(self.policy(q, p)))
        fg = (value.f, value.g)
        if self.runner.config.routing is RoutingMode.LIVE:
            with self._lock:
                self._live[(q, p)] = fg
        return fg

    def f(self, q: int, p: int) -> float:
        return self._fg(q, p)[0]

    def g(self, q: int, p: int) -> float:
        if self.runner.config.routing is RoutingMode.FROZEN:
            return self.runner.skip_stats(self.policy(q, p)).g
        return self._fg(q, p)[1]
