"""Tests for dual-modality thresholding: skip rule, f/g evaluation and skip profiles."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from evaluation.runner import ForwardRunner, RunConfig
from moe_engine import Modality, RoutingMode, model_forward
from skipping.dmt import (
    SKIP_NOTHING_TAU,
    DMTPolicy,
    ScoreMode,
    ThresholdPair,
    evaluate_fg,
    skip_decision,
    skip_profile,
)
from skipping.gmlg import GlobalFactors

ALL_SKIP = 1 - 1e-6


def test_skip_decision_is_strict_and_modality_specific():
    pair = ThresholdPair(tau_text=0.2, tau_vision=0.5)
    assert skip_decision(0.3, Modality.VISION, pair)
    assert not skip_decision(0.3, Modality.TEXT, pair)
    assert not skip_decision(0.2, Modality.TEXT, pair)


@pytest.mark.parametrize("tau", [0.0, 1.0, -0.1, 1.5])
def test_thresholds_must_be_inside_unit_interval(tau):
    with pytest.raises(ValueError):
        ThresholdPair(tau, 0.5)


@given(st.floats(0, 1), st.floats(1e-6, 1 - 1e-6), st.floats(1e-6, 1 - 1e-6))
def test_skip_decision_is_monotone_in_threshold(score, a, b):
    lo, hi = sorted((a, b))
    if skip_decision(score, Modality.TEXT, ThresholdPair(lo, 0.5)):
        assert skip_decision(score, Modality.TEXT, ThresholdPair(hi, 0.5))


def test_gmlg_scoring_requires_factors():
    with pytest.raises(ValueError):
        DMTPolicy(ThresholdPair(0.1, 0.1))
    DMTPolicy(ThresholdPair(0.1, 0.1), score_mode=ScoreMode.LOCAL)


def test_skip_nothing_thresholds_reproduce_the_default_forward(medium_model, medium_factors, medium_runner,
                                                               medium_calibration):
    policy = DMTPolicy(ThresholdPair.skip_nothing(), medium_factors)
    run = medium_runner.run(policy)
    assert np.array_equal(run.distributions, medium_runner.reference().distributions)
    assert run.stats.skipped_total == 0

    fg = evaluate_fg(medium_model, medium_factors, medium_calibration, ThresholdPair.skip_nothing(),
                     runner=medium_runner)
    assert fg.f == 0.0
    assert fg.g == 0.0

    seq = medium_calibration[0]
    assert np.array_equal(model_forward(medium_model, seq, policy).distribution,
                          model_forward(medium_model, seq).distribution)


def test_skip_nothing_tau_is_smallest_positive_double():
    assert SKIP_NOTHING_TAU > 0
    assert np.nextafter(SKIP_NOTHING_TAU, 0.0) == 0.0


def test_all_skip_thresholds_skip_every_slot(medium_model, medium_factors, medium_calibration, medium_runner):
    fg = evaluate_fg(medium_model, medium_factors, medium_calibration, ThresholdPair(ALL_SKIP, ALL_SKIP),
                     runner=medium_runner)
    assert fg.g == 1.0
    assert fg.f >= 0.0
    assert medium_runner.run(DMTPolicy(ThresholdPair(ALL_SKIP, ALL_SKIP), medium_factors)).expert_evals == 0


def test_vision_threshold_only_touches_vision_tokens(medium_model, medium_factors, medium_calibration,
                                                     medium_runner):
    profile = skip_profile(medium_model, medium_factors, medium_calibration,
                           ThresholdPair(SKIP_NOTHING_TAU, ALL_SKIP), runner=medium_runner)
    ratios = profile.stats.layer_ratios()
    assert np.all(ratios[:, Modality.TEXT.column] == 0.0)
    assert np.all(ratios[:, Modality.VISION.column] == 1.0)
    assert 0 < profile.overall < 1


def test_profile_frame_has_overall_row(medium_model, medium_factors, medium_calibration, medium_runner):
    pair = ThresholdPair(0.05, 0.1)
    profile = skip_profile(medium_model, medium_factors, medium_calibration, pair, runner=medium_runner)
    frame = profile.to_frame()
    assert len(frame) == 2 * medium_model.spec.num_layers + 1
    overall = frame.iloc[-1]
    assert overall["layer"] == "OVERALL"
    assert overall["skipped"] == frame.iloc[:-1]["skipped"].sum()
    fg = evaluate_fg(medium_model, medium_factors, medium_calibration, pair, runner=medium_runner)
    assert overall["ratio"] == fg.g


def test_frozen_skip_stats_match_a_full_run(medium_factors, medium_runner):
    policy = DMTPolicy(ThresholdPair(0.04, 0.08), medium_factors)
    assert medium_runner.skip_stats(policy) == medium_runner.run(policy).stats


def test_results_do_not_depend_on_thread_count(medium_model, medium_factors, medium_calibration):
    pair = ThresholdPair(0.05, 0.07)
    one = evaluate_fg(medium_model, medium_factors, medium_calibration, pair, RunConfig(threads=1, batch_size=5))
    four = evaluate_fg(medium_model, medium_factors, medium_calibration, pair, RunConfig(threads=4, batch_size=5))
    assert one == four


def test_local_scores_ignore_global_factors(medium_runner):
    pair = ThresholdPair(0.2, 0.2)
    a = DMTPolicy(pair, GlobalFactors.from_alpha([1.0, 0.0, 0.0, 0.0]), ScoreMode.LOCAL)
    b = DMTPolicy(pair, None, ScoreMode.LOCAL)
    assert medium_runner.skip_stats(a) == medium_runner.skip_stats(b)


@pytest.mark.parametrize("routing", [RoutingMode.FROZEN, RoutingMode.LIVE])
def test_g_grows_with_thresholds(medium_model, medium_calibration, medium_factors, routing):
    runner = ForwardRunner(medium_model, medium_calibration.samples, RunConfig(routing=routing))
    low = runner.skip_stats(DMTPolicy(ThresholdPair(0.01, 0.01), medium_factors)).g
    high = runner.skip_stats(DMTPolicy(ThresholdPair(0.5, 0.5), medium_factors)).g
    assert low <= high
