"""
Evaluation Metrics for Expert Skipping

Result records for threshold evaluation, per-layer skip profiles,
sweeps across target ratios, and the frontier-vs-naive benchmark.
"""

from dataclasses import dataclass, field
from typing import Optional

import pandas as pd

from moe_engine.stats import SkipStats
from moe_engine.tokens import MODALITIES

PROFILE_COLUMNS = ["layer", "modality", "routed", "skipped", "ratio"]
ABLATION_COLUMNS = ["rho", "scheme", "score_mode", "tau_text", "tau_vision", "f", "g", "feasible"]
SWEEP_COLUMNS = [
    "rho", "policy", "tau_text", "tau_vision", "f", "g", "feasible", "f_calls", "g_calls", "detail",
    "matched_f", "matched_g",
]


@dataclass(frozen=True)
class FGValue:
    """Objective f (average KL, nats) and constraint g (skipped fraction)."""
    f: float
    g: float

    def __post_init__(self):
        if self.f < 0:
            raise ValueError(f"f must be non-negative, got {self.f}")
        if not 0.0 <= self.g <= 1.0:
            raise ValueError(f"g must be in [0, 1], got {self.g}")

    def to_dict(self) -> dict:
        return {"f": self.f, "g": self.g}


@dataclass
class SkipProfile:
    """Skipping ratio per (layer, modality), plus the pooled overall row."""
    stats: SkipStats

    @classmethod
    def from_stats(cls, stats: SkipStats) -> "SkipProfile":
        return cls(stats=stats)

    @property
    def overall(self) -> float:
        return self.stats.g

    def to_frame(self) -> pd.DataFrame:
        ratios = self.stats.layer_ratios()
        rows = []
        for layer in range(self.stats.num_layers):
            for modality in MODALITIES:
                col = modality.column
                rows.append({
                    "layer": str(layer),
                    "modality": modality.value,
                    "routed": int(self.stats.routed[layer, col]),
                    "skipped": int(self.stats.skipped[layer, col]),
                    "ratio": float(ratios[layer, col]),
                })
        rows.append({
            "layer": "OVERALL",
            "modality": "all",
            "routed": self.stats.routed_total,
            "skipped": self.stats.skipped_total,
            "ratio": self.overall,
        })
        return pd.DataFrame(rows, columns=PROFILE_COLUMNS)

    def summary_str(self) -> str:
        ratios = self.stats.layer_ratios()
        lines = [f"{'Layer':<8} {'Text %':>8} {'Vision %':>9}", "-" * 27]
        for layer in range(self.stats.num_layers):
            lines.append(f"{layer:<8} {100 * ratios[layer, 0]:>8.2f} {100 * ratios[layer, 1]:>9.2f}")
        lines.append(f"{'Overall':<8} {100 * self.overall:>8.2f}")
        return "\n".join(lines)


@dataclass
class SweepRow:
    """One policy's solution for one target ratio."""
    rho: float
    policy: str
    f: float
    g: float
    feasible: bool = True
    tau_text: Optional[float] = None
    tau_vision: Optional[float] = None
    f_calls: int = 0
    g_calls: int = 0
    detail: str = ""
    # DMT optimum searched at this row's own g, for baselines
    matched_f: Optional[float] = None
    matched_g: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "policy": self.policy,
            "tau_text": self.tau_text,
            "tau_vision": self.tau_vision,
            "f": self.f,
            "g": self.g,
            "feasible": self.feasible,
            "f_calls": self.f_calls,
            "g_calls": self.g_calls,
            "detail": self.detail,
            "matched_f": self.matched_f,
            "matched_g": self.matched_g,
        }


@dataclass
class SweepResult:
    """All rows of a sweep across target ratios and policies."""
    rows: list[SweepRow] = field(default_factory=list)

    def add_row(self, row: SweepRow) -> None:
        self.rows.append(row)

    def for_policy(self, policy: str) -> list[SweepRow]:
        return [r for r in self.rows if r.policy == policy]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows], columns=SWEEP_COLUMNS)

    def summary_str(self) -> str:
        lines = [
            f"{'rho':<6} {'Policy':<14} {'f (nats)':>12} {'g':>8}  Thresholds / setting",
            "-" * 64,
        ]
        for r in self.rows:
            if r.tau_text is not None:
                setting = f"tau_t={r.tau_text:.4f} tau_v={r.tau_vision:.4f}"
            elif r.policy in ("dmt", "single"):
                setting = "INFEASIBLE"
            else:
                setting = r.detail if r.feasible else f"{r.detail} (below target)"
            if r.matched_f is not None:
                setting += f"  [dmt at same g: f={r.matched_f:.6f}]"
            lines.append(f"{r.rho:<6.2f} {r.policy:<14} {r.f:>12.6f} {r.g:>8.4f}  {setting}")
        return "\n".join(lines)


@dataclass
class BenchResult:
    """Frontier search vs exhaustive search on the same objective."""
    grid_size: int
    rho: float
    num_samples: int
    frontier_f_calls: int
    frontier_g_calls: int
    naive_f_calls: int
    naive_g_calls: int
    frontier_seconds: float
    naive_seconds: float
    frontier_f: Optional[float]
    naive_f: Optional[float]

    @property
    def f_call_ratio(self) -> float:
        if self.frontier_f_calls == 0:
            return 0.0
        return self.naive_f_calls / self.frontier_f_calls

    @property
    def time_ratio(self) -> float:
        if self.frontier_seconds <= 0:
            return 0.0
        return self.naive_seconds / self.frontier_seconds

    @property
    def agree(self) -> bool:
        return self.frontier_f == self.naive_f

    def to_dict(self) -> dict:
        return {
            "D": self.grid_size,
            "rho": self.rho,
            "N": self.num_samples,
            "frontier_f_calls": self.frontier_f_calls,
            "frontier_g_calls": self.frontier_g_calls,
            "naive_f_calls": self.naive_f_calls,
            "naive_g_calls": self.naive_g_calls,
            "frontier_seconds": round(self.frontier_seconds, 4),
            "naive_seconds": round(self.naive_seconds, 4),
            "f_call_ratio": round(self.f_call_ratio, 2),
            "time_ratio": round(self.time_ratio, 2),
            "frontier_f": self.frontier_f,
            "naive_f": self.naive_f,
            "agree": self.agree,
        }

    def summary_str(self) -> str:
        lines = [
            f"Search benchmark (D={self.grid_size}, N={self.num_samples}, rho={self.rho})",
            "=" * 50,
            f"{'Metric':<20} {'Frontier':>12} {'Naive':>12}",
            "-" * 46,
            f"{'f evaluations':<20} {self.frontier_f_calls:>12} {self.naive_f_calls:>12}",
            f"{'g evaluations':<20} {self.frontier_g_calls:>12} {self.naive_g_calls:>12}",
            f"{'Wall time (s)':<20} {self.frontier_seconds:>12.3f} {self.naive_seconds:>12.3f}",
            "",
            f"f-evaluation ratio: {self.f_call_ratio:.1f}x",
            f"Wall-clock ratio:   {self.time_ratio:.1f}x",
            f"Optima agree:       {self.agree}",
        ]
        return "\n".join(lines)


@dataclass
class AblationRow:
    """Best f for one (threshold scheme, score mode) cell at one target ratio."""
    rho: float
    scheme: str
    score_mode: str
    f: Optional[float]
    g: Optional[float]
    tau_text: Optional[float] = None
    tau_vision: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return self.f is not None

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "scheme": self.scheme,
            "score_mode": self.score_mode,
            "tau_text": self.tau_text,
            "tau_vision": self.tau_vision,
            "f": self.f,
            "g": self.g,
            "feasible": self.feasible,
        }


@dataclass
class AblationResult:
    """{single, dual} x {local, gmlg} table across target ratios."""
    rows: list[AblationRow] = field(default_factory=list)

    def cell(self, rho: float, scheme: str, score_mode: str) -> AblationRow:
        for row in self.rows:
            if row.rho == rho and row.scheme == scheme and row.score_mode == score_mode:
                return row
        raise KeyError((rho, scheme, score_mode))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows], columns=ABLATION_COLUMNS)

    def summary_str(self) -> str:
        lines = [f"{'rho':<6} {'Scheme':<8} {'Score':<7} {'f (nats)':>12} {'g':>8}", "-" * 45]
        for r in self.rows:
            if r.feasible:
                lines.append(f"{r.rho:<6.2f} {r.scheme:<8} {r.score_mode:<7} {r.f:>12.6f} {r.g:>8.4f}")
            else:
                lines.append(f"{r.rho:<6.2f} {r.scheme:<8} {r.score_mode:<7} {'INFEASIBLE':>12}")
        return "\n".join(lines)


SCALE_COLUMNS = [
    "axis", "N", "D", "rho", "tau_text", "tau_vision", "f", "g",
    "f_calls", "g_calls", "seconds", "f_full", "g_full",
]


@dataclass
class ScaleRow:
    """Frontier search at one calibration size N or grid size D."""
    axis: str
    num_samples: int
    grid_size: int
    rho: float
    f: Optional[float]
    g: Optional[float]
    f_calls: int
    g_calls: int
    seconds: float
    tau_text: Optional[float] = None
    tau_vision: Optional[float] = None
    # the found thresholds re-evaluated on the whole calibration set
    f_full: Optional[float] = None
    g_full: Optional[float] = None

    @property
    def feasible(self) -> bool:
        return self.f is not None

    def to_dict(self) -> dict:
        return {
            "axis": self.axis,
            "N": self.num_samples,
            "D": self.grid_size,
            "rho": self.rho,
            "tau_text": self.tau_text,
            "tau_vision": self.tau_vision,
            "f": self.f,
            "g": self.g,
            "f_calls": self.f_calls,
            "g_calls": self.g_calls,
            "seconds": round(self.seconds, 4),
            "f_full": self.f_full,
            "g_full": self.g_full,
        }


@dataclass
class ScaleResult:
    """Search quality and cost as N or D varies."""
    rows: list[ScaleRow] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.to_dict() for r in self.rows], columns=SCALE_COLUMNS)

    def summary_str(self) -> str:
        lines = [
            f"{'N':>6} {'D':>5} {'rho':>6} {'f (nats)':>12} {'g':>8} {'f calls':>8} {'g calls':>8} {'Time (s)':>9}",
            "-" * 68,
        ]
        for r in self.rows:
            head = f"{r.num_samples:>6} {r.grid_size:>5} {r.rho:>6.2f}"
            if r.feasible:
                lines.append(f"{head} {r.f:>12.6f} {r.g:>8.4f} {r.f_calls:>8} {r.g_calls:>8} {r.seconds:>9.3f}")
            else:
                lines.append(f"{head} {'INFEASIBLE':>12} {'':>8} {r.f_calls:>8} {r.g_calls:>8} {r.seconds:>9.3f}")
        return "\n".join(lines)
