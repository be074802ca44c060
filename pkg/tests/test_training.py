import dataclasses
import json
import math

import numpy as np
import pytest

from src.dataset import DatasetError, SupervisionState
from src.evaluation import accuracy
from src.helpers import make_rng
from src.memory_network import forward, init_params
from src.models.config_types import TrainConfig
from src.models.corpus_types import Sentiment
from src.training import (
    DivergenceError,
    MinedCorpus,
    expected_distribution,
    prediction_set,
    regularizer,
    train,
    train_supervised,
)

TOY = [
    ("the screen is great", Sentiment.POSITIVE),
    ("screen great and colorful", Sentiment.POSITIVE),
    ("the great screen", Sentiment.POSITIVE),
    ("is the screen great", Sentiment.POSITIVE),
    ("the screen is dim", Sentiment.NEGATIVE),
    ("screen dim and no backlight", Sentiment.NEGATIVE),
    ("the dim screen", Sentiment.NEGATIVE),
    ("is the screen dim", Sentiment.NEGATIVE),
    ("the screen is", Sentiment.NEUTRAL),
    ("screen is the screen", Sentiment.NEUTRAL),
    ("the screen but", Sentiment.NEUTRAL),
    ("is the screen", Sentiment.NEUTRAL),
]


@pytest.fixture
def toy_corpus(make_instance):
    corpus = []
    for i, (text, label) in enumerate(TOY):
        words = text.split()
        corpus.append(
            make_instance(text, [words.index("screen")], label=label, id=f"t{i}")
        )
    return corpus


@pytest.fixture
def config():
    return TrainConfig(lr=0.05, epochs=60, batch_size=2, dropout=0.0, seed=3)


def test_expected_distribution():
    assert expected_distribution([2, 5], [3]) == {2: 0.5, 5: 0.5, 3: 0.0}
    assert expected_distribution([], [4]) == {4: 0.0}
    assert expected_distribution([], []) == {}
    with pytest.raises(ValueError, match="overlap"):
        expected_distribution([1, 2], [2])


def test_regularizer():
    alpha = np.array([0.1, 0.6, 0.3])
    assert regularizer(alpha, {1: 0.5, 2: 0.0}) == pytest.approx(0.1)
    assert regularizer(alpha, {}) == 0.0
    assert regularizer(alpha, {1: 0.6}) == 0.0


def test_training_fits_separable_corpus(params, toy_corpus, config):
    result = train(params, toy_corpus, config)
    assert accuracy(prediction_set(result.params, toy_corpus)) == 1.0
    assert result.history[-1].train_loss < result.history[0].train_loss
    assert result.best_epoch == config.epochs
    assert len(result.history) == config.epochs


def test_first_epoch_loss_is_near_log3(vocab, toy_corpus):
    params = init_params(len(vocab), 6, make_rng(0), init_range=1e-4)
    config = TrainConfig(lr=1e-6, epochs=1, dropout=0.0)
    result = train(params, toy_corpus, config)
    assert result.history[0].train_loss == pytest.approx(math.log(3), abs=1e-2)


def test_training_is_deterministic(params, toy_corpus):
    config = TrainConfig(lr=0.01, epochs=3, batch_size=4, seed=7)
    a = train(params, toy_corpus, config)
    b = train(params, toy_corpus, config)
    for name, tensor in a.params.as_dict().items():
        np.testing.assert_array_equal(tensor, getattr(b.params, name))
    assert a.history == b.history


def test_training_leaves_input_params_untouched(params, toy_corpus):
    before = {k: v.copy() for k, v in params.as_dict().items()}
    train(params, toy_corpus, TrainConfig(lr=0.01, epochs=2))
    for name, tensor in before.items():
        np.testing.assert_array_equal(tensor, getattr(params, name))


def _mined(toy_corpus):
    state = SupervisionState(toy_corpus)
    state.add_active("t0", 3)
    state.add_misleading("t0", 0)
    state.add_misleading("t4", 2)
    return MinedCorpus(toy_corpus, state)


def test_zero_gamma_reproduces_plain_training(params, toy_corpus):
    config = TrainConfig(lr=0.01, epochs=3, batch_size=4, gamma=0.0, seed=1)
    plain = train(params, toy_corpus, config)
    supervised = train_supervised(params, _mined(toy_corpus), config)
    for name, tensor in plain.params.as_dict().items():
        np.testing.assert_array_equal(tensor, getattr(supervised.params, name))


def test_empty_supervision_reproduces_plain_training(params, toy_corpus):
    config = TrainConfig(lr=0.01, epochs=3, batch_size=4, gamma=0.5, seed=1)
    empty = MinedCorpus(toy_corpus, SupervisionState(toy_corpus))
    plain = train(params, toy_corpus, config)
    supervised = train_supervised(params, empty, config)
    for name, tensor in plain.params.as_dict().items():
        np.testing.assert_array_equal(tensor, getattr(supervised.params, name))


def test_supervision_pulls_attention_towards_expectation(
    params, toy_corpus
):
    config = TrainConfig(lr=0.02, epochs=20, batch_size=4, gamma=5.0, seed=1)
    state = SupervisionState(toy_corpus)
    for inst in toy_corpus:
        if inst.words[0] == "the":
            state.add_misleading(inst.id, 0)
    corpus = MinedCorpus(toy_corpus, state)
    plain = train(params, toy_corpus, config)
    supervised = train_supervised(params, corpus, config)

    def attention_on_the(p):
        return sum(
            forward(p, inst).alpha[0]
            for inst in toy_corpus
            if inst.words[0] == "the"
        )

    assert attention_on_the(supervised.params) < attention_on_the(plain.params)


def test_early_stopping_keeps_best_epoch(params, toy_corpus):
    config = TrainConfig(
        lr=0.05, epochs=40, batch_size=2, patience=2, dropout=0.3, seed=5
    )
    result = train(params, toy_corpus[::2], config, validation=toy_corpus[1::2])
    f1 = [r.val_macro_f1 for r in result.history]
    assert result.best_epoch == 1 + f1.index(max(f1))
    if len(result.history) < config.epochs:
        assert len(result.history) == result.best_epoch + config.patience
    assert all(r.val_accuracy is not None for r in result.history)


def test_divergence_names_epoch_and_batch(params, toy_corpus):
    broken = dataclasses.replace(
        params, output_bias=np.array([np.nan, 0.0, 0.0])
    )
    with pytest.raises(DivergenceError, match="epoch 1 batch 0"):
        train(broken, toy_corpus, TrainConfig(epochs=1))


def test_empty_corpus_is_rejected(params):
    with pytest.raises(ValueError, match="empty corpus"):
        train(params, [], TrainConfig(epochs=1))


def test_mined_corpus_expected_and_scopes(toy_corpus):
    corpus = _mined(toy_corpus)
    assert corpus.expected["t0"] == {3: 1.0, 0: 0.0}
    assert corpus.expected["t4"] == {2: 0.0}
    assert corpus.expected["t1"] == {}
    assert corpus.restrict("s_a").expected["t0"] == {3: 1.0}
    assert corpus.restrict("s_a").expected["t4"] == {}
    assert corpus.restrict("s_m").expected["t0"] == {0: 0.0}


def test_mined_corpus_save_load(tmp_path, toy_corpus):
    path = tmp_path / "supervision.jsonl"
    _mined(toy_corpus).save(path)
    first = json.loads(path.read_text().splitlines()[0])
    assert first == {
        "id": "t0",
        "s_a": [3],
        "s_m": [0],
        "expected": [[0, 0.0], [3, 1.0]],
        "scope": "both",
    }
    loaded = MinedCorpus.load(path, toy_corpus)
    assert loaded.expected == _mined(toy_corpus).expected


@pytest.mark.parametrize("scope", ["both", "s_a", "s_m"])
def test_restricted_corpus_reloads_with_its_scope(tmp_path, toy_corpus, scope):
    path = tmp_path / "supervision.jsonl"
    restricted = _mined(toy_corpus).restrict(scope)
    restricted.save(path)
    loaded = MinedCorpus.load(path, toy_corpus)
    assert loaded.scope == scope
    assert loaded.expected == restricted.expected
    assert loaded.state.active("t0") == [3]
    assert loaded.state.misleading("t0") == [0]


def test_mined_corpus_rejects_mixed_scopes(tmp_path, toy_corpus):
    path = tmp_path / "supervision.jsonl"
    _mined(toy_corpus).restrict("s_a").save(path)
    lines = path.read_text().splitlines()
    lines[1] = lines[1].replace('"scope":"s_a"', '"scope":"both"')
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetError, match="mix supervision scopes"):
        MinedCorpus.load(path, toy_corpus)


def test_mined_corpus_rejects_tampered_expectation(tmp_path, toy_corpus):
    path = tmp_path / "supervision.jsonl"
    _mined(toy_corpus).save(path)
    path.write_text(path.read_text().replace("[3,1.0]", "[3,0.5]", 1))
    with pytest.raises(DatasetError, match="inconsistent"):
        MinedCorpus.load(path, toy_corpus)


def test_expected_distribution_law_on_random_sets():
    rng = make_rng(0, "sets")
    for _ in range(500):
        positions = rng.permutation(20)
        n_a, n_m = rng.integers(0, 6, size=2)
        s_a = positions[:n_a].tolist()
        s_m = positions[n_a : n_a + n_m].tolist()
        expected = expected_distribution(s_a, s_m)
        assert set(expected) == set(s_a) | set(s_m)
        assert all(expected[p] == 1.0 / len(s_a) for p in s_a)
        assert all(expected[p] == 0.0 for p in s_m)
