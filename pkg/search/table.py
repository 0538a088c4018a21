"""
Memoized f/g evaluation over grid-index pairs.

An objective exposes ``f(q, p)`` and ``g(q, p)`` for 1-based grid indices,
q indexing the text threshold and p the vision threshold. ``FGTable`` wraps
it, caches every value by (q, p) and counts true evaluations only.
"""

import logging
import threading
from typing import Optional, Protocol

import numpy as np

from moe_engine.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


class GridObjective(Protocol):
    def f(self, q: int, p: int) -> float: ...

    def g(self, q: int, p: int) -> float: ...


class ArrayObjective:
    """Objective backed by precomputed D x D arrays (row q-1, column p-1)."""

    def __init__(self, f_values, g_values):
        self.f_values = np.asarray(f_values, dtype=np.float64)
        self.g_values = np.asarray(g_values, dtype=np.float64)
        if self.f_values.shape != self.g_values.shape or self.f_values.ndim != 2:
            raise InvalidArgumentError("f and g tables must be square arrays of one shape")
        if self.f_values.shape[0] != self.f_values.shape[1]:
            raise InvalidArgumentError("f and g tables must be square")

    @property
    def size(self) -> int:
        return int(self.f_values.shape[0])

    def f(self, q: int, p: int) -> float:
        return float(self.f_values[q - 1, p - 1])

    def g(self, q: int, p: int) -> float:
        return float(self.g_values[q - 1, p - 1])


class FGTable:
    """Counting, memoizing view of an objective over a D x D grid.

    With ``memoize=False`` every call re-evaluates and is counted; the last
    value of each pair is still kept for ``peek_g``.
    """

    def __init__(self, objective: GridObjective, size: int, memoize: bool = True, run_logger=None, grid=None):
        self.objective = objective
        self.size = size
        self.memoize = memoize
        self.run_logger = run_logger
        self.grid = grid
        self.f_calls = 0
        self.g_calls = 0
        self.audit_g_calls = 0
        self._f: dict[tuple[int, int], float] = {}
        self._g: dict[tuple[int, int], float] = {}
        self._lock = threading.Lock()

    def _check(self, q: int, p: int) -> None:
        if not (1 <= q <= self.size and 1 <= p <= self.size):
            raise InvalidArgumentError(f"grid pair ({q}, {p}) outside [1, {self.size}]^2")

    def _lookup(self, kind: str, q: int, p: int, audit: bool = False) -> float:
        self._check(q, p)
        memo = self._f if kind == "f" else self._g
        with self._lock:
            if self.memoize and (q, p) in memo:
                return memo[(q, p)]
        value = float(getattr(self.objective, kind)(q, p))
        with self._lock:
            if kind == "f":
                self.f_calls += 1
            elif audit:
                self.audit_g_calls += 1
            else:
                self.g_calls += 1
            memo[(q, p)] = value
            if self.run_logger is not None:
                taus = {} if self.grid is None else {"tau_text": self.grid.tau(q), "tau_vision": self.grid.tau(p)}
                self.run_logger.log_step(kind, q=q, p=p, value=value, **taus)
        return value

    def f(self, q: int, p: int) -> float:
        return self._lookup("f", q, p)

    def g(self, q: int, p: int) -> float:
        return self._lookup("g", q, p)

    def audit_g(self, q: int, p: int) -> float:
        """g used only to check search invariants; counted apart from g_calls."""
        return self._lookup("g", q, p, audit=True)

    def peek_g(self, q: int, p: int) -> Optional[float]:
        with self._lock:
            return self._g.get((q, p))

    def counters(self) -> dict:
        with self._lock:
            return {"f_calls": self.f_calls, "g_calls": self.g_calls, "audit_g_calls": self.audit_g_calls}

    def materialize(self) -> tuple[np.ndarray, np.ndarray]:
        """Full D x D arrays of f and g (row q-1, column p-1)."""
        F = np.empty((self.size, self.size), dtype=np.float64)
        G = np.empty((self.size, self.size), dtype=np.float64)
        for q in range(1, self.size + 1):
            for p in range(1, self.size + 1):
                G[q - 1, p - 1] = self.g(q, p)
                F[q - 1, p - 1] = self.f(q, p)
        return F, G
