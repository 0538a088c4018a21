"""
Frontier search over the (text, vision) threshold grid.

With f and g monotone in both indices, the feasible region {g >= rho} is an
upper set, so the smallest feasible p for each q moves left as q grows. A
two-pointer scan finds that frontier with at most 2D evaluations of g, and
f is then evaluated only on the D frontier points.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import pandas as pd

from moe_engine.errors import ContractViolation, InvalidArgumentError
from search.grid import Grid
from search.table import FGTable

logger = logging.getLogger(__name__)

FRONTIER_COLUMNS = ["q", "p", "tau_text", "tau_vision", "f", "g"]


@dataclass(frozen=True)
class SearchPoint:
    """A grid pair with its thresholds and objective values (1-based indices)."""
    q: int
    p: int
    tau_text: float
    tau_vision: float
    f: float
    g: float

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "p": self.p,
            "tau_text": self.tau_text,
            "tau_vision": self.tau_vision,
            "f": self.f,
            "g": self.g,
        }


@dataclass(frozen=True)
class Violation:
    """A frontier entry that breaks a scan invariant."""
    q: int
    p: int
    kind: str
    message: str


def _check_rho(rho: float) -> None:
    if not 0.0 < rho < 1.0:
        raise InvalidArgumentError(f"rho must be in (0, 1), got {rho}")


def _check_grid(table: FGTable, grid: Grid) -> None:
    if table.size != grid.size:
        raise InvalidArgumentError(f"table covers {table.size} grid points, grid has {grid.size}")


@dataclass
class FrontierResult:
    """Frontier entries, the chosen optimum and evaluation counters."""
    rho: float
    grid_size: int
    entries: list[SearchPoint] = field(default_factory=list)
    optimum: Optional[SearchPoint] = None
    f_calls: int = 0
    g_calls: int = 0
    audit_g_calls: int = 0
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return self.optimum is not None

    @property
    def status(self) -> str:
        return "OK" if self.feasible else "INFEASIBLE"

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([e.to_dict() for e in self.entries], columns=FRONTIER_COLUMNS)

    def summary(self, num_samples: int = 0) -> dict:
        record = {
            "status": self.status,
            "rho": self.rho,
            "D": self.grid_size,
            "N": num_samples,
            "f_calls": self.f_calls,
            "g_calls": self.g_calls,
        }
        if self.optimum is not None:
            o = self.optimum
            record.update({
                "q": o.q, "p": o.p, "tau_text": o.tau_text, "tau_vision": o.tau_vision,
                "f": o.f, "g": o.g,
            })
        return record

    def summary_str(self) -> str:
        if self.optimum is None:
            return f"INFEASIBLE: no grid pair reaches g >= {self.rho} (D={self.grid_size})"
        o = self.optimum
        return "\n".join([
            f"Frontier search (D={self.grid_size}, rho={self.rho})",
            f"  frontier size: {len(self.entries)}",
            f"  optimum:       q={o.q} p={o.p} tau_text={o.tau_text:.6f} tau_vision={o.tau_vision:.6f}",
            f"  f={o.f:.6g}  g={o.g:.4f}",
            f"  evaluations:   f={self.f_calls} g={self.g_calls}",
        ])


def _best(points: list[SearchPoint]) -> Optional[SearchPoint]:
    """Min f; ties go to the larger g, then to the smaller (q, p)."""
    if not points:
        return None
    return min(points, key=lambda e: (e.f, -e.g, e.q, e.p))


def frontier_search(
    table: FGTable,
    grid: Grid,
    rho: float,
    threads: int = 1,
    strict: bool = True,
) -> FrontierResult:
    """Two-pointer frontier scan followed by f on every frontier point.

    For q = 1..D, p starts where the previous row stopped and decreases while
    g(q, p) >= rho; the frontier point of row q is the last feasible p. Rows
    with no feasible p are dropped. If no row is feasible the result carries
    no optimum and reports INFEASIBLE.

    Every kept entry is re-checked for feasibility (counted as audit calls).
    A failure means g is not monotone; with ``strict`` it raises
    ContractViolation, otherwise it is logged and recorded.
    """
    _check_rho(rho)
    _check_grid(table, grid)
    D = grid.size
    pairs: list[tuple[int, int]] = []
    violations: list[Violation] = []

    p = D
    for q in range(1, D + 1):
        while p >= 1 and table.g(q, p) >= rho:
            p -= 1
        if p + 1 <= D:
            pairs.append((q, p + 1))

    for q, p_q in pairs:
        g_here = table.peek_g(q, p_q)
        if g_here is None:
            g_here = table.audit_g(q, p_q)
        if g_here < rho:
            violations.append(Violation(q, p_q, "infeasible", f"g({q},{p_q})={g_here:.6g} < rho={rho}"))
        if p_q > 1:
            g_left = table.peek_g(q, p_q - 1)
            if g_left is not None and g_left >= rho:
                violations.append(Violation(q, p_q, "not-minimal", f"g({q},{p_q - 1})={g_left:.6g} >= rho={rho}"))

    if violations:
        for v in violations:
            logger.warning("frontier invariant broken at (%d, %d): %s", v.q, v.p, v.message)
        if strict:
            raise ContractViolation(
                f"{len(violations)} frontier entries break the scan invariants; g is not monotone"
            )

    def evaluate(pair: tuple[int, int]) -> SearchPoint:
        q, p_q = pair
        return SearchPoint(
            q=q,
            p=p_q,
            tau_text=grid.tau(q),
            tau_vision=grid.tau(p_q),
            f=table.f(q, p_q),
            g=table.peek_g(q, p_q),
        )

    if threads > 1 and len(pairs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(evaluate, pairs))
    else:
        entries = [evaluate(pair) for pair in pairs]

    feasible = [e for e in entries if e.g >= rho]
    counters = table.counters()
    result = FrontierResult(
        rho=rho,
        grid_size=D,
        entries=entries,
        optimum=_best(feasible),
        violations=violations,
        **counters,
    )
    if result.feasible:
        logger.info("frontier: %d entries, optimum (%d, %d)", len(entries), result.optimum.q, result.optimum.p)
    else:
        logger.info("frontier: infeasible at rho=%s", rho)
    return result


@dataclass
class ExhaustiveResult:
    """Optimum of a full grid or diagonal enumeration."""
    rho: float
    grid_size: int
    optimum: Optional[SearchPoint] = None
    f_calls: int = 0
    g_calls: int = 0

    @property
    def feasible(self) -> bool:
        return self.optimum is not None

    @property
    def status(self) -> str:
        return "OK" if self.feasible else "INFEASIBLE"

    def summary(self, num_samples: int = 0) -> dict:
        record = {
            "status": self.status,
            "rho": self.rho,
            "D": self.grid_size,
            "N": num_samples,
            "f_calls": self.f_calls,
            "g_calls": self.g_calls,
        }
        if self.optimum is not None:
            record.update(self.optimum.to_dict())
        return record


def _enumerate(table: FGTable, grid: Grid, rho: float, pairs: list[tuple[int, int]]) -> ExhaustiveResult:
    best: Optional[SearchPoint] = None
    for q, p in pairs:
        g = table.g(q, p)
        f = table.f(q, p)
        # strict < keeps the lexicographically smallest pair on ties
        if g >= rho and (best is None or f < best.f):
            best = SearchPoint(q, p, grid.tau(q), grid.tau(p), f, g)
    counters = table.counters()
    return ExhaustiveResult(
        rho=rho,
        grid_size=grid.size,
        optimum=best,
        f_calls=counters["f_calls"],
        g_calls=counters["g_calls"],
    )


def naive_search(table: FGTable, grid: Grid, rho: float) -> ExhaustiveResult:
    """Evaluate f and g at all D*D pairs; min f among feasible, ties to the smallest (q, p)."""
    _check_rho(rho)
    _check_grid(table, grid)
    D = grid.size
    return _enumerate(table, grid, rho, [(q, p) for q in range(1, D + 1) for p in range(1, D + 1)])


def single_threshold_search(table: FGTable, grid: Grid, rho: float) -> ExhaustiveResult:
    """Same threshold for both modalities: scan the diagonal q == p."""
    _check_rho(rho)
    _check_grid(table, grid)
    return _enumerate(table, grid, rho, [(q, q) for q in range(1, grid.size + 1)])
