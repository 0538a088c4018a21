"""Threshold grid built from a rectified sigmoid over equally spaced points."""

from dataclasses import dataclass

import numpy as np

from moe_engine.errors import InvalidArgumentError

GRID_EPS = 1e-6
GRID_SLOPE = 12.0


@dataclass(frozen=True)
class Grid:
    """Strictly increasing thresholds in (0, 1). Indices are 1-based: tau(1) < ... < tau(D)."""
    values: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if not values:
            raise InvalidArgumentError("grid needs at least one value")
        if any(not 0.0 < v < 1.0 for v in values):
            raise InvalidArgumentError("grid values must lie in (0, 1)")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise InvalidArgumentError("grid values must be strictly increasing")

    @property
    def size(self) -> int:
        return len(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def tau(self, index: int) -> float:
        if not 1 <= index <= len(self.values):
            raise InvalidArgumentError(f"grid index must be in [1, {len(self.values)}], got {index}")
        return self.values[index - 1]

    def as_array(self) -> np.ndarray:
        return np.array(self.values, dtype=np.float64)


def make_grid(size: int) -> Grid:
    """tau(i) = clamp(sigmoid(12 * (i / (D + 1) - 0.5)), eps, 1 - eps) for i = 1..D."""
    if int(size) != size or size < 2:
        raise InvalidArgumentError(f"grid size must be an integer >= 2, got {size}")
    u = np.arange(1, size + 1, dtype=np.float64) / (size + 1)
    tau = 1.0 / (1.0 + np.exp(-GRID_SLOPE * (u - 0.5)))
    return Grid(tuple(np.clip(tau, GRID_EPS, 1.0 - GRID_EPS)))
