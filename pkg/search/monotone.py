"""Adjacent-pair monotonicity checks for materialized f/g tables."""

import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from search.table import FGTable

logger = logging.getLogger(__name__)

VIOLATION_COLUMNS = ["table", "axis", "q", "p", "magnitude"]


@dataclass(frozen=True)
class Violation:
    """value(next) < value(here) along ``axis``; (q, p) is the lower-index cell, 1-based."""
    table: str
    axis: str
    q: int
    p: int
    magnitude: float

    def to_dict(self) -> dict:
        return {"table": self.table, "axis": self.axis, "q": self.q, "p": self.p, "magnitude": self.magnitude}


@dataclass
class MonotoneReport:
    grid_size: int
    f_violations: list[Violation] = field(default_factory=list)
    g_violations: list[Violation] = field(default_factory=list)

    @property
    def f_monotone(self) -> bool:
        return not self.f_violations

    @property
    def g_monotone(self) -> bool:
        return not self.g_violations

    def to_frame(self) -> pd.DataFrame:
        rows = [v.to_dict() for v in self.f_violations + self.g_violations]
        return pd.DataFrame(rows, columns=VIOLATION_COLUMNS)

    def summary_str(self) -> str:
        lines = [f"Monotonicity check (D={self.grid_size})"]
        for name, found in (("f", self.f_violations), ("g", self.g_violations)):
            if found:
                worst = max(v.magnitude for v in found)
                lines.append(f"  {name}: {len(found)} inversions, largest {worst:.3g}")
            else:
                lines.append(f"  {name}: non-decreasing in both indices")
        return "\n".join(lines)


def adjacent_inversions(values: np.ndarray, name: str) -> list[Violation]:
    """Every cell where stepping q or p by one decreases the value."""
    values = np.asarray(values, dtype=np.float64)
    found = []
    down_q = values[:-1, :] - values[1:, :]
    for i, j in zip(*np.nonzero(down_q > 0)):
        found.append(Violation(name, "q", int(i) + 1, int(j) + 1, float(down_q[i, j])))
    down_p = values[:, :-1] - values[:, 1:]
    for i, j in zip(*np.nonzero(down_p > 0)):
        found.append(Violation(name, "p", int(i) + 1, int(j) + 1, float(down_p[i, j])))
    return found


def verify_monotone(table) -> MonotoneReport:
    """Inversions of f and of g over a full D x D table.

    ``table`` is an FGTable (materialized here, all D*D pairs) or an (F, G)
    pair of arrays indexed [q-1, p-1].
    """
    if isinstance(table, FGTable):
        F, G = table.materialize()
    else:
        F, G = (np.asarray(t, dtype=np.float64) for t in table)
    report = MonotoneReport(
        grid_size=int(F.shape[0]),
        f_violations=adjacent_inversions(F, "f"),
        g_violations=adjacent_inversions(G, "g"),
    )
    if report.g_violations:
        logger.warning("g has %d adjacent inversions on a D=%d grid", len(report.g_violations), report.grid_size)
    return report
