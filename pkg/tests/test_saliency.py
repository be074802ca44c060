import dataclasses
import math

from conftest import random_instance
import numpy as np
import pytest

from src.dataset import apply_mask
from src.helpers import make_rng
from src.memory_network import eligible_positions, forward
from src.numerics import NumericalError, entropy
from src.saliency import (
    compute_saliency,
    normalize_abs,
    saliency_aw,
    saliency_pg,
)


def _finite_difference_saliency(params, instance, masked=(), t=1e-6):
    """Directional derivative of log p(ŷ) along each context row, normalized."""
    predicted = forward(params, instance, masked).prediction
    eligible = eligible_positions(instance, masked)
    raw = np.zeros(len(instance))
    for i in eligible:
        row = params.context_embedding[instance.token_ids[i]]
        noise = np.zeros((len(instance), params.dim))
        noise[i] = t * row
        plus = forward(params, instance, masked, context_noise=noise)
        minus = forward(params, instance, masked, context_noise=-noise)
        raw[i] = (
            np.log(plus.probs[predicted]) - np.log(minus.probs[predicted])
        ) / (2 * t)
    return normalize_abs(raw, eligible)


def test_normalize_abs():
    out = normalize_abs(np.array([7.0, -2.0, 1.0, 1.0]), {1, 2, 3})
    np.testing.assert_allclose(out, [0.0, 0.5, 0.25, 0.25])
    with pytest.raises(NumericalError, match="all-zero"):
        normalize_abs(np.array([1.0, 0.0, 0.0]), {1, 2})
    with pytest.raises(NumericalError, match="empty support"):
        normalize_abs(np.array([1.0]), set())


def test_attention_saliency_is_alpha(params, sentence):
    trace = forward(params, sentence)
    saliency = saliency_aw(trace)
    np.testing.assert_array_equal(saliency.scores, trace.alpha)
    assert saliency.mode == "aw"
    assert saliency.argmax() == int(np.argmax(trace.alpha))


def test_noise_free_saliency_matches_finite_differences(params, vocab):
    rng = make_rng(3, "instances")
    for i in range(10):
        inst = random_instance(vocab, rng, id=f"r{i}")
        expected = _finite_difference_saliency(params, inst)
        actual = saliency_pg(params, inst, n=1, sigma=0.0)
        np.testing.assert_allclose(actual.scores, expected, atol=1e-6)


def test_noise_free_saliency_with_masking(params, sentence):
    expected = _finite_difference_saliency(params, sentence, masked=[3])
    actual = saliency_pg(params, sentence, masked_positions=[3], sigma=0.0)
    np.testing.assert_allclose(actual.scores, expected, atol=1e-6)
    assert actual.scores[3] == 0.0


def test_noise_free_saliency_ignores_sample_count(params, sentence):
    one = saliency_pg(params, sentence, n=1, sigma=0.0)
    many = saliency_pg(params, sentence, n=5, sigma=0.0)
    np.testing.assert_allclose(many.scores, one.scores, atol=1e-12)


def test_noisy_saliency_is_a_distribution(params, vocab):
    rng = make_rng(4, "instances")
    for i in range(20):
        inst = random_instance(vocab, rng, id=f"r{i}")
        saliency = saliency_pg(params, inst, n=4, sigma=0.01, rng=make_rng(i))
        assert abs(saliency.scores.sum() - 1.0) < 1e-9
        assert np.all(saliency.scores >= 0)
        assert not saliency.scores[list(inst.aspect_positions)].any()
        assert saliency.mode == "pg"


def test_distributions_on_random_inputs(params, vocab):
    rng = make_rng(5, "properties")
    for i in range(1000):
        inst = random_instance(vocab, rng, id=f"p{i}")
        context = eligible_positions(inst)
        n_masked = int(rng.integers(0, len(context)))
        masked = sorted(rng.choice(context, size=n_masked, replace=False).tolist())
        if i % 2:
            inst, masked_positions = apply_mask(inst, masked), ()
        else:
            masked_positions = masked
        eligible = eligible_positions(inst, masked_positions)
        assert len(eligible) == len(context) - n_masked
        ineligible = np.setdiff1d(np.arange(len(inst)), eligible)

        trace = forward(params, inst, masked_positions)
        assert abs(trace.alpha.sum() - 1.0) < 1e-12
        assert abs(trace.probs.sum() - 1.0) < 1e-12
        assert np.all(trace.alpha[masked] == 0.0)
        assert np.all(trace.alpha[ineligible] == 0.0)
        assert 0.0 <= entropy(trace.alpha) <= math.log(len(eligible)) + 1e-12

        noisy = saliency_pg(
            params,
            inst,
            masked_positions=masked_positions,
            n=2,
            sigma=0.01,
            rng=make_rng(i),
        )
        for saliency in (saliency_aw(trace), noisy):
            assert abs(saliency.scores.sum() - 1.0) < 1e-9
            assert np.all(saliency.scores >= 0)
            assert np.all(saliency.scores[ineligible] == 0.0)


def test_noisy_saliency_is_deterministic(params, sentence):
    a = saliency_pg(params, sentence, sigma=0.05, rng=make_rng(9))
    b = saliency_pg(params, sentence, sigma=0.05, rng=make_rng(9))
    np.testing.assert_array_equal(a.scores, b.scores)


def test_identical_tokens_get_identical_scores(params, make_instance):
    inst = make_instance("screen huge huge", [0])
    saliency = saliency_pg(params, inst, sigma=0.0)
    np.testing.assert_allclose(saliency.scores, [0.0, 0.5, 0.5])
    assert saliency.argmax() == 1


def test_no_signal_falls_back_to_uniform(params, sentence, caplog):
    silent = dataclasses.replace(
        params, output_weight=np.zeros_like(params.output_weight)
    )
    saliency = saliency_pg(silent, sentence, n=3, sigma=0.01, rng=make_rng(0))
    assert saliency.fallback
    np.testing.assert_allclose(
        saliency.scores[saliency.scores > 0], 1 / 8
    )
    assert "no signal" in caplog.text


def test_more_samples_reduce_variance(params, sentence):
    def spread(n):
        runs = [
            saliency_pg(params, sentence, n=n, sigma=0.1, rng=make_rng(s)).scores
            for s in range(20)
        ]
        return np.var(np.stack(runs), axis=0).sum()

    assert spread(16) < spread(1)


def test_noise_needs_rng(params, sentence):
    with pytest.raises(ValueError, match="rng"):
        saliency_pg(params, sentence, sigma=0.01)
    with pytest.raises(ValueError, match="n must be"):
        saliency_pg(params, sentence, n=0, sigma=0.0)


def test_compute_saliency_dispatch(params, sentence):
    aw = compute_saliency("aw", params, sentence)
    np.testing.assert_array_equal(aw.scores, forward(params, sentence).alpha)
    pg = compute_saliency("pg", params, sentence, sigma=0.0)
    np.testing.assert_array_equal(
        pg.scores, saliency_pg(params, sentence, sigma=0.0).scores
    )
