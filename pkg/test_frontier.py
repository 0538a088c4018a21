"""Tests for the threshold grid, frontier search, exhaustive search and monotonicity checks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evaluation.objective import ThresholdObjective
from moe_engine import ContractViolation, InvalidArgumentError
from reporting import RunLog, RunLogger
from search import (
    ArrayObjective,
    FGTable,
    Grid,
    frontier_search,
    make_grid,
    naive_search,
    single_threshold_search,
    verify_monotone,
)
from skipping.dmt import DMTPolicy, ThresholdPair

PRESETS = (0.48, 0.65, 0.80, 0.85)


def monotone_tables(rng: np.random.Generator, size: int):
    """Random f and g tables, both non-decreasing in q and in p; g scaled into [0, 1]."""
    f = np.cumsum(np.cumsum(rng.random((size, size)), axis=0), axis=1)
    g = np.cumsum(np.cumsum(rng.random((size, size)) ** 3, axis=0), axis=1)
    return f, g / g[-1, -1]


def table_for(f, g, **kwargs):
    return FGTable(ArrayObjective(f, g), f.shape[0], **kwargs)


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("size", [2, 3, 16, 100, 501])
def test_grid_is_strictly_increasing_inside_unit_interval(size):
    grid = make_grid(size)
    values = grid.as_array()
    assert len(grid) == size
    assert np.all(np.diff(values) > 0)
    assert np.all((values > 0) & (values < 1))


def test_odd_grid_has_half_in_the_middle():
    assert make_grid(9).tau(5) == 0.5


def test_grid_formula():
    grid = make_grid(4)
    for i in range(1, 5):
        assert grid.tau(i) == pytest.approx(1 / (1 + np.exp(-12 * (i / 5 - 0.5))), abs=1e-15)


@pytest.mark.parametrize("size", [1, 0, -3])
def test_grid_needs_two_points(size):
    with pytest.raises(InvalidArgumentError):
        make_grid(size)


def test_grid_rejects_unsorted_values():
    with pytest.raises(InvalidArgumentError):
        Grid((0.5, 0.4))


# ---------------------------------------------------------------------------
# Frontier vs exhaustive search
# ---------------------------------------------------------------------------

def test_frontier_matches_exhaustive_search_on_random_monotone_tables():
    rng = np.random.default_rng(2024)
    for trial in range(200):
        size = (8, 16, 32)[trial % 3]
        f, g = monotone_tables(rng, size)
        rho = float(rng.uniform(0.01, 0.99))
        grid = make_grid(size)

        frontier = frontier_search(table_for(f, g), grid, rho)
        naive = naive_search(table_for(f, g), grid, rho)

        assert frontier.feasible == naive.feasible
        if naive.feasible:
            assert frontier.optimum.f == naive.optimum.f
        assert frontier.g_calls <= 2 * size
        assert frontier.f_calls <= size
        assert frontier.f_calls == len(frontier.entries)
        assert naive.f_calls == naive.g_calls == size * size
        assert not frontier.violations


@given(st.integers(2, 10), st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
@settings(max_examples=150, deadline=None)
def test_frontier_invariants_hold(size, seed, rho):
    f, g = monotone_tables(np.random.default_rng(seed), size)
    table = table_for(f, g)
    result = frontier_search(table, make_grid(size), rho)

    ps = [e.p for e in result.entries]
    assert ps == sorted(ps, reverse=True)
    for e in result.entries:
        assert g[e.q - 1, e.p - 1] >= rho
        if e.p > 1:
            assert g[e.q - 1, e.p - 2] < rho
    if result.feasible:
        assert result.optimum.f == min(e.f for e in result.entries)


@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_frontier_tie_break_on_integer_tables(size, seed):
    rng = np.random.default_rng(seed)
    f = np.cumsum(np.cumsum(rng.integers(0, 2, (size, size)), axis=0), axis=1).astype(float)
    g = np.cumsum(np.cumsum(rng.integers(0, 2, (size, size)), axis=0), axis=1).astype(float)
    g = g / max(g.max(), 1.0)
    rho = 0.5
    result = frontier_search(table_for(f, g), make_grid(size), rho)
    naive = naive_search(table_for(f, g), make_grid(size), rho)
    assert result.feasible == naive.feasible
    if result.feasible:
        assert result.optimum.f == naive.optimum.f
        best = [e for e in result.entries if e.f == result.optimum.f]
        top_g = max(e.g for e in best)
        expected = min((e.q, e.p) for e in best if e.g == top_g)
        assert (result.optimum.q, result.optimum.p) == expected


def test_constant_feasible_table_puts_frontier_in_first_column():
    size = 6
    q, p = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    result = frontier_search(table_for((q + p).astype(float), np.ones((size, size))), make_grid(size), 0.5)
    assert [(e.q, e.p) for e in result.entries] == [(i, 1) for i in range(1, size + 1)]
    assert (result.optimum.q, result.optimum.p) == (1, 1)


def test_infeasible_target_returns_empty_result():
    size = 5
    result = frontier_search(table_for(np.ones((size, size)), np.zeros((size, size))), make_grid(size), 0.3)
    assert not result.feasible
    assert result.status == "INFEASIBLE"
    assert result.entries == []
    assert result.to_frame().empty
    assert result.summary(num_samples=4)["status"] == "INFEASIBLE"
    assert result.g_calls <= 2 * size
    assert not naive_search(table_for(np.ones((size, size)), np.zeros((size, size))), make_grid(size), 0.3).feasible


def test_non_monotone_g_breaks_invariants():
    f = np.arange(9, dtype=float).reshape(3, 3)
    g = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(ContractViolation):
        frontier_search(table_for(f, g), make_grid(3), 0.5)

    table = table_for(f, g)
    result = frontier_search(table, make_grid(3), 0.5, strict=False)
    assert [(v.q, v.p) for v in result.violations] == [(2, 3), (3, 3)]
    assert [(e.q, e.p) for e in result.entries] == [(1, 3), (2, 3), (3, 3)]
    assert (result.optimum.q, result.optimum.p) == (1, 3)
    assert table.audit_g_calls == 2


def test_audit_calls_are_counted_apart_from_g_calls():
    size = 4
    table = table_for(np.ones((size, size)), np.ones((size, size)))
    result = frontier_search(table, make_grid(size), 0.5)
    # q = 1 scans down to p = 0; later rows reuse p_(q) = 1 without evaluating g
    assert result.g_calls == size
    assert result.audit_g_calls == size - 1


def test_memo_hits_are_not_counted():
    f, g = monotone_tables(np.random.default_rng(1), 4)
    table = table_for(f, g)
    table.g(2, 3)
    table.g(2, 3)
    table.f(1, 1)
    table.f(1, 1)
    assert table.counters() == {"f_calls": 1, "g_calls": 1, "audit_g_calls": 0}

    unmemoized = table_for(f, g, memoize=False)
    unmemoized.g(2, 3)
    unmemoized.g(2, 3)
    assert unmemoized.g_calls == 2


def test_table_rejects_pairs_outside_grid():
    f, g = monotone_tables(np.random.default_rng(1), 3)
    with pytest.raises(InvalidArgumentError):
        table_for(f, g).f(0, 1)
    with pytest.raises(InvalidArgumentError):
        frontier_search(table_for(f, g), make_grid(4), 0.5)


@pytest.mark.parametrize("rho", [0.0, 1.0, -0.2])
def test_rho_must_be_inside_unit_interval(rho):
    f, g = monotone_tables(np.random.default_rng(1), 3)
    with pytest.raises(InvalidArgumentError):
        frontier_search(table_for(f, g), make_grid(3), rho)
    with pytest.raises(InvalidArgumentError):
        naive_search(table_for(f, g), make_grid(3), rho)


def test_search_is_deterministic_and_thread_independent():
    f, g = monotone_tables(np.random.default_rng(8), 16)
    grid = make_grid(16)
    first = frontier_search(table_for(f, g), grid, 0.4)
    again = frontier_search(table_for(f, g), grid, 0.4)
    threaded = frontier_search(table_for(f, g), grid, 0.4, threads=4)
    assert first == again
    assert first.entries == threaded.entries
    assert first.optimum == threaded.optimum


def test_naive_search_single_cell():
    grid = Grid((0.5,))
    result = naive_search(table_for(np.array([[0.3]]), np.array([[0.9]])), grid, 0.5)
    assert (result.optimum.q, result.optimum.p, result.optimum.f) == (1, 1, 0.3)


def test_naive_search_hand_table():
    f = np.array([[1.0, 2.0], [2.0, 4.0]])
    g = np.array([[0.1, 0.6], [0.6, 0.9]])
    result = naive_search(table_for(f, g), make_grid(2), 0.5)
    # (1,2) and (2,1) tie on f; the lexicographically smaller pair wins
    assert (result.optimum.q, result.optimum.p) == (1, 2)
    assert result.f_calls == 4


def test_single_threshold_search_uses_the_diagonal():
    f = np.array([[1.0, 2.0], [2.0, 4.0]])
    g = np.array([[0.1, 0.6], [0.6, 0.9]])
    table = table_for(f, g)
    result = single_threshold_search(table, make_grid(2), 0.5)
    assert (result.optimum.q, result.optimum.p) == (2, 2)
    assert result.f_calls == 2


# ---------------------------------------------------------------------------
# Monotonicity report
# ---------------------------------------------------------------------------

def test_sum_table_has_no_violations():
    q, p = np.meshgrid(np.arange(1, 9), np.arange(1, 9), indexing="ij")
    report = verify_monotone(((q + p).astype(float), (q * p).astype(float)))
    assert report.f_monotone and report.g_monotone


def test_planted_inversion_is_reported():
    q, p = np.meshgrid(np.arange(1, 6), np.arange(1, 6), indexing="ij")
    f = (2 * q + p).astype(float)
    f[2, 3] = f[2, 2] - 0.5  # below its left neighbour, still above its upper neighbour
    report = verify_monotone((f, np.zeros_like(f)))
    assert [(v.axis, v.q, v.p, v.magnitude) for v in report.f_violations] == [("p", 3, 3, 0.5)]
    assert report.g_monotone


def test_monotone_report_from_table_materializes_everything():
    f, g = monotone_tables(np.random.default_rng(3), 5)
    table = table_for(f, g)
    report = verify_monotone(table)
    assert report.f_monotone and report.g_monotone
    assert table.f_calls == table.g_calls == 25


# ---------------------------------------------------------------------------
# Model-backed tables
# ---------------------------------------------------------------------------

def test_model_g_table_has_no_inversions(medium_runner, medium_factors, tmp_path):
    grid = make_grid(16)
    objective = ThresholdObjective(medium_runner, medium_factors, grid)
    G = np.array([[objective.g(q, p) for p in range(1, 17)] for q in range(1, 17)])
    report = verify_monotone((np.zeros_like(G), G))
    assert report.g_violations == []

    logger = RunLogger(tmp_path)
    logger.start_run("monotone", D=16)
    path = logger.end_run({"g_violations": len(report.g_violations), "report": report.summary_str()})
    assert RunLog.load(path).result["g_violations"] == 0


@pytest.mark.parametrize("rho", PRESETS)
def test_searched_thresholds_reach_the_target(medium_runner, medium_factors, rho):
    grid = make_grid(16)
    objective = ThresholdObjective(medium_runner, medium_factors, grid)
    result = frontier_search(FGTable(objective, grid.size), grid, rho)
    if result.feasible:
        pair = ThresholdPair(result.optimum.tau_text, result.optimum.tau_vision)
        assert medium_runner.run(DMTPolicy(pair, medium_factors)).g >= rho
    assert result.g_calls <= 32 and result.f_calls <= 16


def test_model_backed_exhaustive_search_bounds_frontier(medium_runner, medium_factors):
    grid = make_grid(8)
    frontier = frontier_search(FGTable(ThresholdObjective(medium_runner, medium_factors, grid), 8), grid, 0.5)
    naive = naive_search(FGTable(ThresholdObjective(medium_runner, medium_factors, grid), 8), grid, 0.5)
    assert frontier.feasible and naive.feasible
    assert naive.optimum.f <= frontier.optimum.f


def test_search_steps_are_logged(medium_runner, medium_factors, tmp_path):
    grid = make_grid(6)
    logger = RunLogger(tmp_path, flush_every=5)
    logger.start_run("search", rho=0.5)
    table = FGTable(ThresholdObjective(medium_runner, medium_factors, grid), 6, run_logger=logger, grid=grid)
    result = frontier_search(table, grid, 0.5)
    path = logger.end_run(result.summary(num_samples=32))

    log = RunLog.load(path)
    assert len(log.steps) == result.f_calls + result.g_calls + result.audit_g_calls
    assert {s.event for s in log.steps} <= {"f", "g"}
    assert all("tau_text" in s.data for s in log.steps)
    assert log.result["status"] == result.status
