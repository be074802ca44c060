import numpy as np
import pytest

from src import constants
from src.dataset import (
    DatasetError,
    SupervisionState,
    Vocabulary,
    apply_mask,
    build_vocab,
    class_counts,
    encode_instance,
    format_counts,
    load_corpus,
    load_embeddings,
    load_semeval_xml,
    load_twitter_3line,
    save_corpus,
    split_heldout,
    tokenize,
)
from src.helpers import make_rng
from src.models.corpus_types import Instance, Sentiment

SEMEVAL = """<?xml version="1.0" encoding="UTF-8"?>
<sentences>
  <sentence id="1">
    <text>The battery life is great.</text>
    <aspectTerms>
      <aspectTerm term="battery life" polarity="positive" from="4" to="16"/>
      <aspectTerm term="life" polarity="conflict" from="12" to="16"/>
    </aspectTerms>
  </sentence>
  <sentence id="2">
    <text>No aspects here.</text>
  </sentence>
  <sentence id="3">
    <text>Screen was dim.</text>
    <aspectTerms>
      <aspectTerm term="Screen" polarity="negative" from="0" to="6"/>
    </aspectTerms>
  </sentence>
</sentences>
"""


def _instances(n, label=Sentiment.NEUTRAL):
    return [
        Instance(
            id=f"i{i}", tokens=("a", "b"), aspect_positions=(0,), label=label
        )
        for i in range(n)
    ]


def test_tokenize_lowercases_and_splits_punctuation():
    assert tokenize("The Screen, isn't BRIGHT!") == [
        "the", "screen", ",", "isn", "'", "t", "bright", "!",
    ]


def test_load_twitter_record(tmp_path):
    path = tmp_path / "tweets.raw"
    path.write_text("i love my $T$ !\niphone\n1\nmeh $T$\nnew os\n0\n")
    instances = load_twitter_3line(path)
    assert len(instances) == 2
    first, second = instances
    assert first.tokens == ("i", "love", "my", "iphone", "!")
    assert first.aspect_positions == (3,)
    assert first.label == Sentiment.POSITIVE
    assert second.aspect_positions == (1, 2)
    assert second.label == Sentiment.NEUTRAL
    assert first.id == "tweets-0"


@pytest.mark.parametrize(
    "content, message",
    [
        ("i love $T$\niphone\n", "3-line records"),
        ("i love it\niphone\n1\n", "placeholder"),
        ("i love $T$\niphone\n2\n", "unknown label"),
        ("i love $T$\n  \n1\n", "empty target"),
    ],
)
def test_load_twitter_errors(tmp_path, content, message):
    path = tmp_path / "bad.raw"
    path.write_text(content)
    with pytest.raises(DatasetError, match=message):
        load_twitter_3line(path)


def test_load_semeval_xml(tmp_path):
    path = tmp_path / "laptop.xml"
    path.write_text(SEMEVAL)
    instances = load_semeval_xml(path)
    assert [inst.id for inst in instances] == ["1:4-16", "3:0-6"]
    battery, screen = instances
    assert battery.tokens == ("the", "battery", "life", "is", "great", ".")
    assert battery.aspect_positions == (1, 2)
    assert battery.aspect_words == ("battery", "life")
    assert battery.label == Sentiment.POSITIVE
    assert screen.aspect_positions == (0,)
    assert screen.label == Sentiment.NEGATIVE


def test_load_semeval_span_inside_a_word(tmp_path):
    path = tmp_path / "joined.xml"
    path.write_text(
        '<sentences><sentence id="7"><text>Its keyboardcover feels cheap.'
        "</text><aspectTerms>"
        '<aspectTerm term="keyboard" polarity="negative" from="4" to="12"/>'
        '<aspectTerm term="cover" polarity="neutral" from="12" to="17"/>'
        "</aspectTerms></sentence></sentences>"
    )
    keyboard, cover = load_semeval_xml(path)
    tokens = ("its", "keyboard", "cover", "feels", "cheap", ".")
    assert keyboard.tokens == tokens
    assert keyboard.aspect_positions == (1,)
    assert keyboard.id == "7:4-12"
    assert cover.tokens == tokens
    assert cover.aspect_positions == (2,)
    assert cover.label == Sentiment.NEUTRAL


def test_load_semeval_malformed(tmp_path):
    path = tmp_path / "broken.xml"
    path.write_text("<sentences><sentence id='1'><text>x</text>")
    with pytest.raises(DatasetError, match="malformed XML"):
        load_semeval_xml(path)


def test_load_semeval_bad_offsets(tmp_path):
    path = tmp_path / "offsets.xml"
    path.write_text(SEMEVAL.replace('from="0" to="6"', 'from="0" to="60"'))
    with pytest.raises(DatasetError, match="outside"):
        load_semeval_xml(path)


def test_class_counts_and_format():
    instances = _instances(2, Sentiment.POSITIVE) + _instances(1)
    assert class_counts(instances) == {
        Sentiment.POSITIVE: 2, Sentiment.NEGATIVE: 0, Sentiment.NEUTRAL: 1,
    }
    assert format_counts(instances) == "Pos 2 Neg 0 Neu 1"


def test_corpus_save_load(tmp_path):
    instances = _instances(3)
    save_corpus(tmp_path / "train.jsonl", instances)
    assert load_corpus(tmp_path / "train.jsonl") == instances
    line = (tmp_path / "train.jsonl").read_text().splitlines()[0]
    assert '"aspect":[0]' in line


def test_build_vocab_order():
    instances = [
        Instance(id="a", tokens=("b", "a", "c", "a"), aspect_positions=(0,),
                 label=Sentiment.POSITIVE),
        Instance(id="b", tokens=("c", "d"), aspect_positions=(0,),
                 label=Sentiment.POSITIVE),
    ]
    vocab = build_vocab(instances)
    assert vocab.words == ["<mask>", "<unk>", "a", "c", "b", "d"]
    assert vocab.words[:2] == [constants.MASK_TOKEN, constants.UNK_TOKEN]
    assert build_vocab(instances, min_count=2).words == [
        "<mask>", "<unk>", "a", "c",
    ]


def test_vocabulary_lookup(vocab):
    assert vocab.id_of("screen") == 3
    assert vocab.id_of("zebra") == constants.UNK_ID
    assert "screen" in vocab
    assert vocab.decode(vocab.encode(["the", "screen"])) == ["the", "screen"]
    with pytest.raises(DatasetError, match="must start"):
        Vocabulary(["a", "<mask>", "<unk>"])
    with pytest.raises(DatasetError, match="duplicate"):
        Vocabulary(["<mask>", "<unk>", "a", "a"])


def test_vocabulary_save_load(tmp_path, vocab):
    vocab.save(tmp_path / "vocab.txt")
    loaded = Vocabulary.load(tmp_path / "vocab.txt")
    assert loaded.words == vocab.words
    assert loaded.sha256() == vocab.sha256()


def test_embeddings_without_file(vocab):
    matrix = load_embeddings(None, vocab, dim=4, rng=make_rng(0))
    assert matrix.shape == (len(vocab), 4)
    assert np.all(np.abs(matrix) <= constants.EMBEDDING_OOV_RANGE)


def test_embeddings_copy_known_rows(tmp_path, vocab):
    path = tmp_path / "vectors.txt"
    path.write_text(
        "2 3\n"
        "screen 0.5 -0.5 1.5\n"
        "zebra 9 9 9\n"
        "screen 7 7 7\n"
        "new york 1 2 3\n"
    )
    matrix = load_embeddings(path, vocab, dim=3, rng=make_rng(0))
    np.testing.assert_array_equal(matrix[vocab.id_of("screen")], [0.5, -0.5, 1.5])
    assert np.all(np.abs(matrix[vocab.id_of("battery")]) <= 0.25)


def test_embeddings_empty_file_is_all_random(tmp_path, vocab):
    path = tmp_path / "empty.txt"
    path.write_text("")
    matrix = load_embeddings(path, vocab, dim=3, rng=make_rng(5))
    np.testing.assert_array_equal(
        matrix, load_embeddings(None, vocab, dim=3, rng=make_rng(5))
    )


def test_embeddings_wrong_arity(tmp_path, vocab):
    path = tmp_path / "short.txt"
    path.write_text("screen 0.1 0.2\n")
    with pytest.raises(DatasetError, match="short.txt:1"):
        load_embeddings(path, vocab, dim=3)


def test_embeddings_too_many_values(tmp_path, vocab):
    path = tmp_path / "long.txt"
    path.write_text("battery 1 2 3\nscreen 0.5 0.5 0.5 0.5\n")
    with pytest.raises(DatasetError, match="long.txt:2: .* got 4 values"):
        load_embeddings(path, vocab, dim=3)


def test_split_sizes_and_determinism():
    train, validation = split_heldout(_instances(10), 0.2, make_rng(0))
    assert (len(train), len(validation)) == (8, 2)
    train, validation = split_heldout(_instances(2292), 0.2, make_rng(0))
    assert len(validation) == 458
    assert len(train) == 2292 - 458
    again, _ = split_heldout(_instances(2292), 0.2, make_rng(0))
    assert [i.id for i in again] == [i.id for i in train]
    ids = [int(i.id[1:]) for i in train]
    assert ids == sorted(ids)


@pytest.mark.parametrize(
    "n, fraction, message",
    [(4, 0.2, "at least 5"), (10, 0.0, "fraction"), (10, 1.0, "fraction")],
)
def test_split_errors(n, fraction, message):
    with pytest.raises(DatasetError, match=message):
        split_heldout(_instances(n), fraction, make_rng(0))


def test_apply_mask(sentence):
    masked = apply_mask(sentence, [3])
    assert masked.token_ids[3] == constants.MASK_ID
    assert masked.words[3] == constants.MASK_TOKEN
    assert sentence.words[3] == "huge"
    assert apply_mask(sentence, []) is sentence
    with pytest.raises(DatasetError, match="aspect position"):
        apply_mask(sentence, [1])
    with pytest.raises(DatasetError, match="out of range"):
        apply_mask(sentence, [9])


def test_apply_mask_on_instance():
    inst = _instances(1)[0]
    assert apply_mask(inst, [1]).tokens == ("a", constants.MASK_TOKEN)
    assert inst.tokens == ("a", "b")


def test_encode_instance(vocab):
    inst = Instance(
        id="x", tokens=("the", "zebra"), aspect_positions=(1,),
        label=Sentiment.NEGATIVE,
    )
    encoded = encode_instance(inst, vocab)
    assert encoded.token_ids.tolist() == [2, constants.UNK_ID]
    assert encoded.label == 1
    assert len(encoded) == 2
    assert not encoded.token_ids.flags.writeable


def test_supervision_state(tmp_path, sentence):
    state = SupervisionState([sentence])
    state.add_active("s1", 5)
    state.add_misleading("s1", 3)
    state.add_active("s1", 2)
    assert state.active("s1") == [5, 2]
    assert state.misleading("s1") == [3]
    assert state.extracted("s1") == [2, 3, 5]
    with pytest.raises(DatasetError, match="already extracted"):
        state.add_misleading("s1", 5)
    with pytest.raises(DatasetError, match="aspect position"):
        state.add_active("s1", 1)
    with pytest.raises(DatasetError, match="Unknown instance"):
        state.add_active("nope", 0)

    state.save(tmp_path / "supervision.jsonl")
    loaded = SupervisionState.load(tmp_path / "supervision.jsonl", [sentence])
    assert loaded.active("s1") == [5, 2]
    assert loaded.misleading("s1") == [3]
