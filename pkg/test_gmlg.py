"""Tests for global-factor calibration and importance scores."""

import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_calibration
from evaluation.runner import ForwardRunner, RunConfig
from moe_engine import (
    InvalidArgumentError,
    InvalidInputError,
    LayerAblation,
    ModelSpec,
    RoutingMode,
    SyntheticMoEModel,
    build_synthetic_model,
    model_forward,
)
from skipping.dmt import ThresholdPair, evaluate_fg
from skipping.gmlg import (
    ALPHA_NORM_FLOOR,
    CalibrationSet,
    GlobalFactors,
    calibrate_alpha,
    importance_score,
    kl_divergence,
    normalize_alpha,
)


def softmax(v):
    e = np.exp(v - v.max())
    return e / e.sum()


def rms(v):
    return v / math.sqrt(float(np.mean(v * v)) + 1e-6)


def reference_forward(model, seq, ablate_layer=None, routing=None):
    """Token-by-token forward written with plain loops.

    ``routing`` maps (layer, position) to (experts, weights); when given the
    router is not evaluated. Returns the last-position distribution and the
    routing that was used.
    """
    spec, w = model.spec, model.weights
    H = [w.embedding[t].copy() for t in seq.embed_indices]
    used = {}
    for layer in range(spec.num_layers):
        normed = [rms(h) for h in H]
        running = np.zeros(spec.hidden_dim)
        mixed = []
        for pos, h in enumerate(H):
            running = running + normed[pos]
            mixed.append(h + w.mixing[layer] @ (running / (pos + 1)))
        H = []
        for pos, x in enumerate(mixed):
            if routing is None:
                temp = spec.vision_router_temperature if seq.is_vision[pos] else spec.text_router_temperature
                probs = softmax((w.router[layer] @ rms(x)) / temp)
                experts = sorted(range(spec.experts_per_layer), key=lambda e: (-probs[e], e))[: spec.top_k]
                weights = [probs[e] for e in experts]
            else:
                experts, weights = routing[(layer, pos)]
            used[(layer, pos)] = (experts, weights)
            out = x.copy()
            if layer != ablate_layer:
                for e, pi in zip(experts, weights):
                    out = out + pi * (w.w_out[layer, e] @ np.tanh(w.w_in[layer, e] @ rms(x)))
            H.append(out)
    return softmax(w.head @ rms(H[-1])), used


def reference_kl(p, q):
    return math.fsum(pi * math.log(pi / max(qi, 1e-12)) for pi, qi in zip(p, q) if pi > 0)


@pytest.fixture(scope="module")
def three_layer():
    spec = ModelSpec(num_layers=3, experts_per_layer=6, top_k=2, hidden_dim=8, ffn_dim=12, vocab_size=24, seed=21)
    return build_synthetic_model(spec), make_calibration(spec, count=8, length=5, seed=9)


def test_calibrate_alpha_matches_loop_reference_frozen(three_layer):
    model, calibration = three_layer
    factors = calibrate_alpha(model, calibration)
    for layer in range(model.spec.num_layers):
        kls = []
        for seq in calibration:
            ref, routing = reference_forward(model, seq)
            ablated, _ = reference_forward(model, seq, ablate_layer=layer, routing=routing)
            kls.append(reference_kl(ref, ablated))
        assert abs(factors.alpha[layer] - math.fsum(kls) / len(kls)) < 1e-10


def test_calibrate_alpha_matches_zeroed_layer_model_live(three_layer):
    model, calibration = three_layer
    factors = calibrate_alpha(model, calibration, RunConfig(routing=RoutingMode.LIVE))
    for layer in range(model.spec.num_layers):
        w_out = model.weights.w_out.copy()
        w_out[layer] = 0.0
        zeroed = SyntheticMoEModel(model.spec, dataclasses.replace(model.weights, w_out=w_out))
        kls = [
            reference_kl(model_forward(model, seq).distribution, model_forward(zeroed, seq).distribution)
            for seq in calibration
        ]
        assert abs(factors.alpha[layer] - math.fsum(kls) / len(kls)) < 1e-10


def test_calibrate_alpha_agrees_with_per_sample_ablation(small_model, small_calibration, small_factors):
    for layer in range(small_model.spec.num_layers):
        kls = [
            kl_divergence(
                model_forward(small_model, seq).distribution,
                model_forward(small_model, seq, LayerAblation(layer)).distribution,
            )
            for seq in small_calibration
        ]
        assert abs(small_factors.alpha[layer] - np.mean(kls)) < 1e-10


def test_alpha_is_non_negative_and_normalizes(small_factors):
    assert np.all(small_factors.alpha >= 0)
    assert abs(small_factors.alpha_norm.sum() - 1.0) < 1e-9


def test_zero_weight_layer_has_zero_alpha(three_layer):
    model, calibration = three_layer
    w_out = model.weights.w_out.copy()
    w_out[1] = 0.0
    zeroed = SyntheticMoEModel(model.spec, dataclasses.replace(model.weights, w_out=w_out))
    factors = calibrate_alpha(zeroed, calibration)
    assert factors.alpha[1] == 0.0
    assert factors.alpha[0] > 0
    assert 0.0 < factors.alpha_norm[1] < factors.alpha_norm[0]


def test_zero_factor_layer_is_untouched_at_skip_nothing_thresholds(three_layer):
    model, calibration = three_layer
    w_out = model.weights.w_out.copy()
    w_out[1] = 0.0
    zeroed = SyntheticMoEModel(model.spec, dataclasses.replace(model.weights, w_out=w_out))
    factors = calibrate_alpha(zeroed, calibration)
    fg = evaluate_fg(zeroed, factors, calibration, ThresholdPair.skip_nothing())
    assert fg.f == 0.0
    assert fg.g == 0.0


def test_single_layer_model_normalizes_to_one():
    spec = ModelSpec(num_layers=1, experts_per_layer=4, top_k=2, hidden_dim=6, ffn_dim=8, vocab_size=16, seed=2)
    model = build_synthetic_model(spec)
    factors = calibrate_alpha(model, make_calibration(spec, count=4))
    assert factors.alpha_norm.tolist() == [1.0]


def test_calibration_is_reproducible_and_thread_independent(three_layer):
    model, calibration = three_layer
    one = calibrate_alpha(model, calibration, RunConfig(threads=1, batch_size=3))
    many = calibrate_alpha(model, calibration, RunConfig(threads=4, batch_size=3))
    assert one == many


def test_calibration_records_provenance(small_model, small_calibration, small_factors):
    assert small_factors.model_hash == small_model.fingerprint()
    assert small_factors.num_samples == len(small_calibration)
    assert small_factors.seed == small_calibration.seed


def test_normalize_alpha_falls_back_to_uniform(caplog):
    with caplog.at_level("WARNING"):
        assert normalize_alpha([0.0, 0.0, 0.0, 0.0]).tolist() == [0.25] * 4
    assert "uniform" in caplog.text


def test_normalize_alpha_keeps_every_layer_positive():
    norm = normalize_alpha([2.0, 0.0, 2.0])
    assert norm[1] == pytest.approx(ALPHA_NORM_FLOOR)
    assert norm[1] > 0
    assert abs(norm.sum() - 1.0) < 1e-12
    assert normalize_alpha([1.0, 3.0]).tolist() == [0.25, 0.75]


def test_empty_calibration_set_is_rejected():
    with pytest.raises(InvalidInputError):
        CalibrationSet([])


def test_runner_rejects_empty_sample_list(small_model):
    with pytest.raises(ValueError):
        ForwardRunner(small_model, [])


# ---------------------------------------------------------------------------
# KL divergence and scores
# ---------------------------------------------------------------------------

distributions = st.lists(st.floats(0.01, 1.0), min_size=2, max_size=12).map(lambda v: np.array(v) / np.sum(v))


@given(distributions)
@settings(max_examples=200)
def test_kl_of_identical_distributions_is_zero(p):
    assert kl_divergence(p, p) == 0.0


@given(distributions, st.randoms())
@settings(max_examples=200)
def test_kl_is_non_negative_and_matches_reference(p, rnd):
    q = np.array(p)
    rnd.shuffle(q)
    value = kl_divergence(p, q)
    assert value >= 0
    assert abs(value - reference_kl(p, q)) < 1e-12


def test_kl_floors_zero_q():
    assert kl_divergence([1.0, 0.0], [0.0, 1.0]) == pytest.approx(math.log(1e12))


@pytest.mark.parametrize("p,q", [([0.5, 0.6], [0.5, 0.5]), ([0.5, 0.5], [1.0]), ([-0.1, 1.1], [0.5, 0.5])])
def test_kl_rejects_invalid_distributions(p, q):
    with pytest.raises(InvalidInputError):
        kl_divergence(p, q)


def test_importance_score_scales_probability():
    factors = GlobalFactors.from_alpha([1.0, 3.0])
    assert importance_score(factors, 1, 0.5) == 0.75 * 0.5
    with pytest.raises(InvalidArgumentError):
        importance_score(factors, 2, 0.5)
    with pytest.raises(InvalidInputError):
        importance_score(factors, 0, 1.0)


@given(st.floats(1e-6, 1 - 1e-6), st.lists(st.floats(0.0, 10.0), min_size=1, max_size=8))
def test_scores_lie_in_unit_interval(pi, alpha):
    factors = GlobalFactors.from_alpha(alpha)
    for layer in range(factors.num_layers):
        assert 0.0 < importance_score(factors, layer, pi) < 1.0
