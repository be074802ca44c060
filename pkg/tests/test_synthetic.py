from collections import Counter

from src.models.corpus_types import Sentiment
from src.synthetic import (
    ASPECTS,
    DISTRACTOR,
    FILLERS,
    SyntheticConfig,
    cue_words,
    generate,
)


def _cues(inst):
    return [w for w in inst.tokens if w not in (DISTRACTOR, *FILLERS, *ASPECTS)]


def test_sizes_and_ids():
    train, test = generate(seed=0)
    assert len(train) == 600
    assert len(test) == 300
    assert train[0].id == "synthetic-train-0"
    assert test[-1].id == "synthetic-test-299"


def test_same_seed_same_corpus():
    assert generate(seed=4) == generate(seed=4)
    assert generate(seed=4)[0] != generate(seed=5)[0]


def test_aspect_is_a_single_known_word():
    train, test = generate(seed=1)
    for inst in train + test:
        assert len(inst.aspect_positions) == 1
        assert inst.aspect_words[0] in ASPECTS
        assert len(inst.tokens) in (3, 4)


def test_one_cue_of_the_gold_label():
    train, test = generate(seed=3)
    for inst in train + test:
        cues = _cues(inst)
        assert len(cues) == 1
        assert cues[0] in cue_words(inst.label, 60)


def test_cues_are_rare_in_training():
    train, _ = generate(seed=3)
    counts = Counter(_cues(inst)[0] for inst in train)
    assert max(counts.values()) <= 12
    assert counts.total() / len(counts) < 4
    distractor = sum(DISTRACTOR in inst.tokens for inst in train)
    assert distractor > 10 * max(counts.values())


def test_distractor_skew():
    train, test = generate(seed=2)
    assert all(DISTRACTOR in inst.tokens for inst in test)

    def rate(label):
        group = [inst for inst in train if inst.label == label]
        return sum(DISTRACTOR in inst.tokens for inst in group) / len(group)

    assert rate(Sentiment.POSITIVE) > 0.75
    assert rate(Sentiment.NEGATIVE) < 0.2
    assert rate(Sentiment.NEUTRAL) < 0.2
    with_distractor = [inst for inst in train if DISTRACTOR in inst.tokens]
    positive = sum(inst.label == Sentiment.POSITIVE for inst in with_distractor)
    assert positive / len(with_distractor) > 0.8


def test_custom_config():
    config = SyntheticConfig(
        n_train=10, n_test=5, cues_per_label=2, fillers_per_sentence=2
    )
    train, test = generate(seed=0, config=config)
    assert (len(train), len(test)) == (10, 5)
    assert all(len(inst.tokens) in (4, 5) for inst in train)
    assert {_cues(inst)[0] for inst in train + test} <= {
        "good00", "good01", "bad00", "bad01", "plain00", "plain01",
    }
