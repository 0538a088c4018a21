#!/usr/bin/env python3
"""
Expert-Skipping Pipeline Runner

Generate a synthetic MoE model and calibration data, calibrate global
factors, search dual-modality thresholds and report the results.

Usage:
    python run_modes.py init-config
    python run_modes.py gen-model
    python run_modes.py gen-data
    python run_modes.py calibrate
    python run_modes.py search --rho 0.80
    python run_modes.py evaluate --frontier runs/frontier_rho0.80.csv

Examples:
    # Full pipeline with the default configuration
    python run_modes.py init-config && python run_modes.py gen-model && python run_modes.py gen-data
    python run_modes.py calibrate
    python run_modes.py search --rho 0.80 --D 100

    # Check frontier search against exhaustive search on a small grid
    python run_modes.py search --rho 0.65 --D 16 --naive

    # Every strategy at every preset target ratio
    python run_modes.py sweep --D 32

    # Frontier vs exhaustive evaluation counts and wall time
    python run_modes.py bench --D 100 --rho 0.80

    # Single vs dual thresholds, local vs global-factor scores
    python run_modes.py ablate --rho 0.65 0.80

    # Search quality and cost against calibration size and grid size
    python run_modes.py ablate --rho 0.80 --samples 64 256 1024 --grid-sizes 25 50 100
"""

import argparse
import logging
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from evaluation.metrics import ScaleResult, SkipProfile
from evaluation.objective import ThresholdObjective
from evaluation.runner import ForwardRunner
from evaluation.sweep import RHO_PRESETS, ablate, ablate_grid, ablate_samples, bench_model, reduced_k_for, sweep
from io_config import (
    ExperimentConfig,
    apply_env_overrides,
    file_hash,
    generate_calibration_set,
    load_beta,
    load_config,
    load_dataset,
    load_factors,
    load_model,
    save_beta,
    save_config,
    save_dataset,
    save_factors,
    save_model,
)
from moe_engine import build_synthetic_model, flop_count
from moe_engine.errors import ContractViolation
from reporting import RunLogger, read_frame, write_frame, write_record
from search import FGTable, frontier_search, make_grid, naive_search, verify_monotone
from skipping import (
    DMTPolicy,
    MassRulePolicy,
    ScoreMode,
    ThresholdPair,
    calibrate_alpha,
    calibrate_beta,
    fg_from_run,
    reduced_k_policy,
)

MODEL_FILE = "model.bin"
DATA_FILE = "data.csv"
FACTORS_FILE = "factors.json"


def rho_tag(rho: float) -> str:
    return f"rho{rho:.2f}"


def parse_rho(text: str) -> float:
    rho = float(text)
    if not 0.0 < rho < 1.0:
        raise argparse.ArgumentTypeError(f"rho must be in (0, 1), got {text}")
    return rho


class Workspace:
    """Config plus the artifact directory a command reads and writes."""

    def __init__(self, args):
        self.workdir = Path(args.workdir)
        self.config = apply_env_overrides(load_config(args.config), threads=args.threads)
        self.run_config = self.config.run_config()

    def path(self, name: str) -> Path:
        return self.workdir / name

    def refuse_overwrite(self, path: Path, force: bool) -> None:
        if path.exists() and not force:
            raise FileExistsError(f"{path} already exists (use --force to overwrite)")

    def model(self):
        return load_model(self.path(MODEL_FILE))

    def calibration(self):
        return load_dataset(self.path(DATA_FILE))

    def factors(self):
        return load_factors(self.path(FACTORS_FILE))

    def grid(self, size=None):
        return make_grid(size or self.config.grid_size)

    def score_mode(self, args) -> ScoreMode:
        return ScoreMode(getattr(args, "score_mode", None) or self.config.score_mode)


def cmd_init_config(args) -> int:
    path = Path(args.config)
    if path.exists() and not args.force:
        raise FileExistsError(f"{path} already exists (use --force to overwrite)")
    save_config(ExperimentConfig(), path)
    print(f"Wrote default configuration to {path}")
    return 0


def cmd_gen_model(args) -> int:
    ws = Workspace(args)
    path = ws.path(MODEL_FILE)
    ws.refuse_overwrite(path, args.force)
    model = build_synthetic_model(ws.config.model_spec())
    save_model(model, path)
    print(f"Model written to {path}")
    print(f"  model hash: {model.fingerprint()}")
    print(f"  file hash:  {file_hash(path)}")
    return 0


def cmd_gen_data(args) -> int:
    ws = Workspace(args)
    path = ws.path(DATA_FILE)
    ws.refuse_overwrite(path, args.force)
    calibration = generate_calibration_set(ws.config)
    save_dataset(calibration, path)
    print(f"Calibration set written to {path}")
    print(f"  samples: {len(calibration)}, vision fraction: {calibration.vision_fraction:.3f}")
    print(f"  content hash: {calibration.content_hash()}")
    print(f"  file hash:    {file_hash(path)}")
    return 0


def cmd_calibrate(args) -> int:
    ws = Workspace(args)
    model, calibration = ws.model(), ws.calibration()
    runner = ForwardRunner(model, calibration.samples, ws.run_config)
    factors = calibrate_alpha(model, calibration, runner=runner)
    path = ws.path(FACTORS_FILE)
    save_factors(factors, path)

    print(f"\n{'Layer':<8} {'alpha':>12} {'alpha_norm':>12}")
    print("-" * 34)
    for layer, (a, a_norm) in enumerate(zip(factors.alpha, factors.alpha_norm)):
        print(f"{layer:<8} {a:>12.6g} {a_norm:>12.6f}")
    print(f"\nGlobal factors written to {path} (hash {file_hash(path)})")

    if args.beta:
        rho = args.rho or ws.config.rho
        schedule = calibrate_beta(model, calibration, rho, runner=runner)
        beta_path = ws.path(f"beta_{rho_tag(rho)}.json")
        save_beta(schedule, beta_path)
        print(f"Mass-rule schedule for rho={rho} written to {beta_path}")
        print("  beta: " + " ".join(f"{b:.2f}" for b in schedule.beta))
    return 0


def cmd_search(args) -> int:
    ws = Workspace(args)
    model, calibration, factors = ws.model(), ws.calibration(), ws.factors()
    rho = args.rho or ws.config.rho
    grid = ws.grid(args.D)
    score_mode = ws.score_mode(args)
    runner = ForwardRunner(model, calibration.samples, ws.run_config)

    run_logger = RunLogger(ws.path("logs"))
    run_logger.start_run("search", seed=ws.config.seed, rho=rho, D=grid.size, N=len(calibration),
                         score_mode=score_mode.value, routing=ws.run_config.routing.value)
    table = FGTable(ThresholdObjective(runner, factors, grid, score_mode), grid.size,
                    run_logger=run_logger, grid=grid)
    try:
        # the runner already spreads each evaluation over the worker threads
        result = frontier_search(table, grid, rho, strict=not args.lenient)
    except ContractViolation as e:
        run_logger.end_run(error=str(e))
        raise
    summary = result.summary(len(calibration))
    log_path = run_logger.end_run(summary)

    tag = rho_tag(rho)
    write_frame(result.to_frame(), ws.path(f"frontier_{tag}.csv"))
    write_record(summary, ws.path(f"search_{tag}.csv"))
    print(result.summary_str())
    print(f"\nFrontier written to {ws.path(f'frontier_{tag}.csv')}")
    print(f"Run log: {log_path}")

    if args.naive:
        naive_table = FGTable(ThresholdObjective(runner, factors, grid, score_mode), grid.size)
        naive = naive_search(naive_table, grid, rho)
        write_record(naive.summary(len(calibration)), ws.path(f"naive_{tag}.csv"))
        frontier_f = result.optimum.f if result.feasible else None
        naive_f = naive.optimum.f if naive.feasible else None
        ratio = naive.f_calls / result.f_calls if result.f_calls else 0.0
        agreement = {
            "rho": rho,
            "D": grid.size,
            "frontier_f": frontier_f,
            "naive_f": naive_f,
            "agree": frontier_f == naive_f,
            "frontier_f_calls": result.f_calls,
            "naive_f_calls": naive.f_calls,
            "f_call_ratio": ratio,
        }
        write_record(agreement, ws.path(f"agreement_{tag}.csv"))
        print(f"\nExhaustive search: status={naive.status} f={naive_f}")
        print(f"Optima agree: {agreement['agree']}  (f-call ratio {ratio:.1f}x)")
        archive_monotone(ws, naive_table, rho)
    return 0


def archive_monotone(ws: Workspace, table: FGTable, rho: float) -> None:
    """Inversion report of a fully evaluated table, as CSV and as a run log."""
    report = verify_monotone(table)
    tag = rho_tag(rho)
    write_frame(report.to_frame(), ws.path(f"monotone_{tag}.csv"))
    run_logger = RunLogger(ws.path("logs"))
    run_logger.start_run("monotone", seed=ws.config.seed, rho=rho, D=report.grid_size)
    for v in report.f_violations + report.g_violations:
        run_logger.log_step("inversion", **v.to_dict())
    run_logger.end_run({"f_monotone": report.f_monotone, "g_monotone": report.g_monotone})
    print(f"\n{report.summary_str()}")


def thresholds_from_frontier(path: Path) -> ThresholdPair:
    frame = read_frame(path)
    if frame.empty:
        raise ValueError(f"{path} holds no frontier entries (infeasible search)")
    best = frame.assign(neg_g=-frame["g"]).sort_values(["f", "neg_g", "q", "p"]).iloc[0]
    return ThresholdPair(float(best["tau_text"]), float(best["tau_vision"]))


def evaluation_policy(args, ws: Workspace, model, factors):
    """The SkipPolicy selected by --policy (or POLICY) plus its thresholds, if any."""
    name = args.policy or ws.config.policy
    rho = ws.config.rho
    if name == "reduced-k":
        k_prime = ws.config.k_prime or reduced_k_for(model.spec.top_k, rho)
        return name, reduced_k_policy(model, k_prime), None
    if name == "mass-rule":
        schedule = load_beta(ws.path(f"beta_{rho_tag(rho)}.json"))
        return name, MassRulePolicy(schedule.beta), None

    if args.frontier:
        thresholds = thresholds_from_frontier(Path(args.frontier))
    elif name == "single" and args.tau_text is not None:
        thresholds = ThresholdPair.single(args.tau_text)
    elif args.tau_text is not None and args.tau_vision is not None:
        thresholds = ThresholdPair(args.tau_text, args.tau_vision)
    else:
        raise ValueError("give --frontier or both --tau-text and --tau-vision")
    if name == "single" and thresholds.tau_text != thresholds.tau_vision:
        raise ValueError("policy 'single' needs one threshold for both modalities")
    return name, DMTPolicy(thresholds, factors, ws.score_mode(args)), thresholds


def cmd_evaluate(args) -> int:
    ws = Workspace(args)
    model, calibration, factors = ws.model(), ws.calibration(), ws.factors()
    name, policy, thresholds = evaluation_policy(args, ws, model, factors)
    runner = ForwardRunner(model, calibration.samples, ws.run_config)

    run = runner.run(policy)
    fg = fg_from_run(runner.reference(), run)
    profile = SkipProfile.from_stats(run.stats)
    flops = flop_count(model.spec, run.stats)

    print(f"\nPolicy: {policy.describe()}")
    print(f"f (avg KL, nats): {fg.f:.6g}")
    print(f"g (skipped):      {fg.g:.4f}")
    print(f"Expert FLOP savings: {100 * flops.expert_savings:.2f}%")
    print(f"Total FLOP savings:  {100 * flops.total_savings:.2f}%\n")
    print(profile.summary_str())

    write_frame(profile.to_frame(), ws.path("profile.csv"))
    write_record({
        "policy": name,
        "tau_text": thresholds.tau_text if thresholds else None,
        "tau_vision": thresholds.tau_vision if thresholds else None,
        **fg.to_dict(),
        **flops.to_dict(),
    }, ws.path("evaluation.csv"))
    print(f"\nProfile written to {ws.path('profile.csv')}")
    return 0


def cmd_sweep(args) -> int:
    ws = Workspace(args)
    model, calibration, factors = ws.model(), ws.calibration(), ws.factors()
    run_logger = RunLogger(ws.path("logs"))
    run_logger.start_run("sweep", seed=ws.config.seed, rhos=list(args.rho), D=args.D or ws.config.grid_size)
    result = sweep(model, factors, calibration, ws.grid(args.D), args.rho, config=ws.run_config,
                   include_mass_rule=not args.no_mass_rule, run_logger=run_logger)
    run_logger.end_run({"rows": [r.to_dict() for r in result.rows]})
    write_frame(result.to_frame(), ws.path("sweep.csv"))
    print(result.summary_str())
    print(f"\nSweep written to {ws.path('sweep.csv')}")
    return 0


def cmd_bench(args) -> int:
    ws = Workspace(args)
    model, calibration, factors = ws.model(), ws.calibration(), ws.factors()
    rho = args.rho or ws.config.rho
    result = bench_model(model, factors, calibration, ws.grid(args.D), rho, config=ws.run_config)
    write_record(result.to_dict(), ws.path(f"bench_{rho_tag(rho)}.csv"))
    print(result.summary_str())
    return 0


def cmd_ablate(args) -> int:
    ws = Workspace(args)
    model, calibration = ws.model(), ws.calibration()
    if args.samples or args.grid_sizes:
        return _ablate_scale(args, ws, model, calibration)
    factors = ws.factors()
    result = ablate(model, factors, calibration, ws.grid(args.D), args.rho, config=ws.run_config,
                    exhaustive=args.exhaustive)
    write_frame(result.to_frame(), ws.path("ablation.csv"))
    print(result.summary_str())
    return 0


def _ablate_scale(args, ws, model, calibration) -> int:
    if args.samples:
        rows = []
        for rho in args.rho:
            rows += ablate_samples(model, calibration, ws.grid(args.D), rho, args.samples, config=ws.run_config).rows
        result = ScaleResult(rows)
        write_frame(result.to_frame(), ws.path("ablation_N.csv"))
        print(result.summary_str())
    if args.grid_sizes:
        factors = ws.factors()
        rows = []
        for rho in args.rho:
            rows += ablate_grid(model, factors, calibration, rho, args.grid_sizes, config=ws.run_config).rows
        result = ScaleResult(rows)
        write_frame(result.to_frame(), ws.path("ablation_D.csv"))
        print(result.summary_str())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Training-free expert skipping on a synthetic MoE model",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=__doc__,
    )
    parser.add_argument("--config", "-c", default="modes.env", help="Configuration file (default: modes.env)")
    parser.add_argument("--workdir", "-w", default="runs", help="Artifact directory (default: runs)")
    parser.add_argument("--threads", "-j", type=int, default=None,
                        help="Worker threads (overrides MODES_THREADS and the config)")
    parser.add_argument("--verbose", "-v", action="store_true", help="Show progress logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-config", help="Write the default configuration file")
    p.add_argument("--force", action="store_true", help="Overwrite an existing file")
    p.set_defaults(func=cmd_init_config)

    p = sub.add_parser("gen-model", help="Build the synthetic model from the config")
    p.add_argument("--force", action="store_true", help="Overwrite an existing model file")
    p.set_defaults(func=cmd_gen_model)

    p = sub.add_parser("gen-data", help="Generate the calibration set")
    p.add_argument("--force", action="store_true", help="Overwrite an existing dataset file")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("calibrate", help="Compute per-layer global factors")
    p.add_argument("--beta", action="store_true", help="Also calibrate the mass-rule beta schedule")
    p.add_argument("--rho", type=parse_rho, default=None, help="Target ratio for --beta (default: config RHO)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("search", help="Frontier search for dual-modality thresholds")
    p.add_argument("--rho", type=parse_rho, default=None,
                   help=f"Target skipping ratio (default: config RHO; presets {', '.join(map(str, RHO_PRESETS))})")
    p.add_argument("--D", type=int, default=None, help="Grid size (default: config GRID_SIZE)")
    p.add_argument("--naive", action="store_true", help="Also run exhaustive search and compare")
    p.add_argument("--score-mode", choices=[m.value for m in ScoreMode], default=None)
    p.add_argument("--lenient", action="store_true", help="Record frontier invariant violations instead of failing")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("evaluate", help="f, g, FLOP savings and per-layer skip profile")
    p.add_argument("--frontier", default=None, help="Frontier CSV from 'search'; its optimum is evaluated")
    p.add_argument("--tau-text", type=float, default=None)
    p.add_argument("--tau-vision", type=float, default=None)
    p.add_argument("--policy", choices=["dmt", "single", "reduced-k", "mass-rule"], default=None,
                   help="Skip policy (default: config POLICY)")
    p.add_argument("--score-mode", choices=[m.value for m in ScoreMode], default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="All strategies across target ratios")
    p.add_argument("--rho", type=parse_rho, nargs="+", default=list(RHO_PRESETS))
    p.add_argument("--D", type=int, default=None)
    p.add_argument("--no-mass-rule", action="store_true", help="Skip the mass-rule baseline")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="Frontier vs exhaustive search cost")
    p.add_argument("--rho", type=parse_rho, default=None)
    p.add_argument("--D", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ablate", help="{single, dual} thresholds x {local, gmlg} scores")
    p.add_argument("--rho", type=parse_rho, nargs="+", default=list(RHO_PRESETS))
    p.add_argument("--D", type=int, default=None)
    p.add_argument("--exhaustive", action="store_true", help="Search dual thresholds over the full grid")
    p.add_argument("--samples", type=int, nargs="+", default=None, metavar="N",
                   help="Frontier search on the first N calibration sequences instead (ablation_N.csv)")
    p.add_argument("--grid-sizes", type=int, nargs="+", default=None, metavar="D",
                   help="Frontier search at each grid size instead (ablation_D.csv)")
    p.set_defaults(func=cmd_ablate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (OSError, ValueError, ContractViolation) as e:
        print(f"\nError: {e}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
