"""
Sweep, Benchmark and Ablation Drivers

Run every skipping strategy across target ratios, compare frontier search
with exhaustive search, and tabulate the score/threshold-scheme ablation.
"""

import logging
import math
import time
from typing import Callable, Optional, Sequence

from evaluation.metrics import (
    AblationResult,
    AblationRow,
    BenchResult,
    ScaleResult,
    ScaleRow,
    SweepResult,
    SweepRow,
)
from evaluation.objective import ThresholdObjective
from evaluation.runner import ForwardRunner, RunConfig
from moe_engine.errors import InvalidArgumentError
from moe_engine.model import RoutingMode, SyntheticMoEModel
from search.frontier import frontier_search, naive_search, single_threshold_search
from search.grid import Grid, make_grid
from search.table import FGTable, GridObjective
from skipping.baselines import MassRulePolicy, calibrate_beta, reduced_k_policy
from skipping.dmt import DMTPolicy, ScoreMode, ThresholdPair, fg_from_run
from skipping.gmlg import CalibrationSet, GlobalFactors, calibrate_alpha

logger = logging.getLogger(__name__)

RHO_PRESETS = (0.48, 0.65, 0.73, 0.80, 0.85)


def reduced_k_for(k: int, rho: float) -> int:
    """k' = max(1, floor(k * (1 - rho))): the fewest kept experts that reach rho when possible."""
    return max(1, math.floor(k * (1.0 - rho) + 1e-12))


def _table(objective: GridObjective, grid: Grid, run_logger=None) -> FGTable:
    return FGTable(objective, grid.size, run_logger=run_logger, grid=grid)


def _dmt_at(runner: ForwardRunner, factors: GlobalFactors, grid: Grid, rho: float, strict: bool, run_logger=None):
    # frontier f-evaluations stay serial: each one already fans out over the runner's threads
    return frontier_search(_table(ThresholdObjective(runner, factors, grid), grid, run_logger), grid, rho, strict=strict)


def _baseline_row(rho, policy_name, fg, detail, matched) -> SweepRow:
    o = matched.optimum if matched is not None else None
    return SweepRow(
        rho, policy_name, fg.f, fg.g, fg.g >= rho, detail=detail,
        matched_f=o.f if o else None, matched_g=o.g if o else None,
    )


def sweep(
    model: SyntheticMoEModel,
    factors: GlobalFactors,
    calibration: CalibrationSet,
    grid: Grid,
    rhos: Sequence[float] = RHO_PRESETS,
    config: Optional[RunConfig] = None,
    include_mass_rule: bool = True,
    run_logger=None,
) -> SweepResult:
    """DMT, single-threshold, reduced-k and mass-rule solutions for every rho.

    Baseline rows also carry the DMT optimum searched at the baseline's own g
    (``matched_f``), so the schemes can be compared at equal skip ratios.
    """
    runner = ForwardRunner(model, calibration.samples, config)
    reference = runner.reference()
    strict = runner.config.routing is RoutingMode.FROZEN
    result = SweepResult()

    def matched(g: float):
        return _dmt_at(runner, factors, grid, g, strict) if 0.0 < g < 1.0 else None

    for rho in rhos:
        dmt = _dmt_at(runner, factors, grid, rho, strict, run_logger)
        if dmt.feasible:
            o = dmt.optimum
            result.add_row(SweepRow(rho, "dmt", o.f, o.g, True, o.tau_text, o.tau_vision, dmt.f_calls, dmt.g_calls))
        else:
            logger.warning("dmt: rho=%s is infeasible on this grid", rho)
            result.add_row(SweepRow(rho, "dmt", float("nan"), float("nan"), False,
                                    f_calls=dmt.f_calls, g_calls=dmt.g_calls))

        single = single_threshold_search(_table(ThresholdObjective(runner, factors, grid), grid), grid, rho)
        if single.feasible:
            o = single.optimum
            result.add_row(SweepRow(rho, "single", o.f, o.g, True, o.tau_text, o.tau_vision,
                                    single.f_calls, single.g_calls))
        else:
            result.add_row(SweepRow(rho, "single", float("nan"), float("nan"), False,
                                    f_calls=single.f_calls, g_calls=single.g_calls))

        policy = reduced_k_policy(model, reduced_k_for(model.spec.top_k, rho))
        fg = fg_from_run(reference, runner.run(policy))
        result.add_row(_baseline_row(rho, "reduced-k", fg, policy.describe(), matched(fg.g)))

        if include_mass_rule:
            schedule = calibrate_beta(model, calibration, rho, runner=runner)
            mass = MassRulePolicy(schedule.beta)
            fg = fg_from_run(reference, runner.run(mass))
            result.add_row(_baseline_row(rho, "mass-rule", fg, mass.describe(), matched(fg.g)))

        logger.info("sweep: rho=%s done", rho)
    return result


def bench(
    make_objective: Callable[[], GridObjective],
    grid: Grid,
    rho: float,
    num_samples: int = 0,
    threads: int = 1,
) -> BenchResult:
    """Frontier vs exhaustive search on fresh tables of the same objective."""
    frontier_table = FGTable(make_objective(), grid.size)
    start = time.perf_counter()
    frontier = frontier_search(frontier_table, grid, rho, threads=threads)
    frontier_seconds = time.perf_counter() - start

    naive_table = FGTable(make_objective(), grid.size)
    start = time.perf_counter()
    naive = naive_search(naive_table, grid, rho)
    naive_seconds = time.perf_counter() - start

    return BenchResult(
        grid_size=grid.size,
        rho=rho,
        num_samples=num_samples,
        frontier_f_calls=frontier.f_calls,
        frontier_g_calls=frontier.g_calls,
        naive_f_calls=naive.f_calls,
        naive_g_calls=naive.g_calls,
        frontier_seconds=frontier_seconds,
        naive_seconds=naive_seconds,
        frontier_f=frontier.optimum.f if frontier.feasible else None,
        naive_f=naive.optimum.f if naive.feasible else None,
    )


def bench_model(
    model: SyntheticMoEModel,
    factors: GlobalFactors,
    calibration: CalibrationSet,
    grid: Grid,
    rho: float,
    config: Optional[RunConfig] = None,
) -> BenchResult:
    """bench() over the model-backed objective; the reference pass is computed before timing."""
    runner = ForwardRunner(model, calibration.samples, config)
    runner.reference()
    return bench(
        lambda: ThresholdObjective(runner, factors, grid),
        grid, rho, num_samples=len(calibration),
    )


def ablate(
    model: SyntheticMoEModel,
    factors: GlobalFactors,
    calibration: CalibrationSet,
    grid: Grid,
    rhos: Sequence[float] = RHO_PRESETS,
    config: Optional[RunConfig] = None,
    exhaustive: bool = False,
) -> AblationResult:
    """Best f of {single, dual} thresholds x {local, gmlg} scores at each rho.

    Dual thresholds use frontier search, or the full grid with ``exhaustive``.
    """
    runner = ForwardRunner(model, calibration.samples, config)
    runner.reference()
    result = AblationResult()
    for rho in rhos:
        for score_mode in (ScoreMode.LOCAL, ScoreMode.GMLG):
            for scheme in ("single", "dual"):
                table = _table(ThresholdObjective(runner, factors, grid, score_mode), grid)
                if scheme == "single":
                    found = single_threshold_search(table, grid, rho)
                elif exhaustive:
                    found = naive_search(table, grid, rho)
                else:
                    found = frontier_search(table, grid, rho)
                o = found.optimum
                result.rows.append(AblationRow(
                    rho=rho,
                    scheme=scheme,
                    score_mode=score_mode.value,
                    f=o.f if o else None,
                    g=o.g if o else None,
                    tau_text=o.tau_text if o else None,
                    tau_vision=o.tau_vision if o else None,
                ))
    return result


def _scale_row(axis, found, seconds, num_samples, grid_size, rho, full: Optional[ForwardRunner], factors) -> ScaleRow:
    o = found.optimum
    row = ScaleRow(
        axis=axis, num_samples=num_samples, grid_size=grid_size, rho=rho,
        f=o.f if o else None, g=o.g if o else None,
        f_calls=found.f_calls, g_calls=found.g_calls, seconds=seconds,
        tau_text=o.tau_text if o else None, tau_vision=o.tau_vision if o else None,
    )
    if o is not None and full is not None:
        fg = fg_from_run(full.reference(), full.run(DMTPolicy(ThresholdPair(o.tau_text, o.tau_vision), factors)))
        row.f_full, row.g_full = fg.f, fg.g
    return row


def ablate_samples(
    model: SyntheticMoEModel,
    calibration: CalibrationSet,
    grid: Grid,
    rho: float,
    sizes: Sequence[int],
    config: Optional[RunConfig] = None,
) -> ScaleResult:
    """Frontier search using only the first n calibration sequences, for each n in sizes.

    The global factors are recalibrated on the same n sequences. The thresholds
    found are then re-evaluated on the whole set (``f_full``, ``g_full``).
    """
    for n in sizes:
        if not 1 <= n <= len(calibration):
            raise InvalidArgumentError(f"calibration size must be in [1, {len(calibration)}], got {n}")
    full = ForwardRunner(model, calibration.samples, config)
    full.reference()
    result = ScaleResult()
    for n in sizes:
        subset = CalibrationSet(calibration.samples[:n], seed=calibration.seed)
        runner = ForwardRunner(model, subset.samples, config)
        factors = calibrate_alpha(model, subset, runner=runner)
        start = time.perf_counter()
        found = frontier_search(_table(ThresholdObjective(runner, factors, grid), grid), grid, rho)
        seconds = time.perf_counter() - start
        result.rows.append(_scale_row("N", found, seconds, n, grid.size, rho, full, factors))
        logger.info("ablate: N=%d done in %.3fs", n, seconds)
    return result


def ablate_grid(
    model: SyntheticMoEModel,
    factors: GlobalFactors,
    calibration: CalibrationSet,
    rho: float,
    grid_sizes: Sequence[int],
    config: Optional[RunConfig] = None,
) -> ScaleResult:
    """Frontier search on make_grid(D) for each D in grid_sizes."""
    runner = ForwardRunner(model, calibration.samples, config)
    runner.reference()
    result = ScaleResult()
    for size in grid_sizes:
        grid = make_grid(size)
        start = time.perf_counter()
        found = frontier_search(_table(ThresholdObjective(runner, factors, grid), grid), grid, rho)
        seconds = time.perf_counter() - start
        result.rows.append(_scale_row("D", found, seconds, len(calibration), size, rho, None, factors))
        logger.info("ablate: D=%d done in %.3fs", size, seconds)
    return result
