"""
Threshold grid, memoized f/g tables, frontier and exhaustive search.
"""

from search.frontier import (
    ExhaustiveResult,
    FrontierResult,
    SearchPoint,
    frontier_search,
    naive_search,
    single_threshold_search,
)
from search.grid import Grid, make_grid
from search.monotone import MonotoneReport, verify_monotone
from search.table import ArrayObjective, FGTable, GridObjective

__all__ = [
    "ArrayObjective",
    "ExhaustiveResult",
    "FGTable",
    "FrontierResult",
    "Grid",
    "GridObjective",
    "MonotoneReport",
    "SearchPoint",
    "frontier_search",
    "make_grid",
    "naive_search",
    "single_threshold_search",
    "verify_monotone",
]
