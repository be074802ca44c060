import numpy as np
import pytest

from src.dataset import Vocabulary, encode_instance
from src.helpers import make_rng
from src.memory_network import init_params
from src.models.corpus_types import Instance, Sentiment

WORDS = [
    "<mask>", "<unk>", "the", "screen", "is", "huge", "but", "dim",
    "battery", "life", "great", "and", "colorful", "no", "backlight",
]

# Extended precision keeps finite-difference round-off far below the
# gradient magnitudes of a freshly initialized model.
EXTENDED = np.longdouble
needs_extended = pytest.mark.skipif(
    np.finfo(np.longdouble).eps > 1e-18,
    reason="platform long double is not extended precision",
)


@pytest.fixture
def vocab():
    return Vocabulary(WORDS)


@pytest.fixture
def make_instance(vocab):
    def _make(tokens, aspect, label=Sentiment.POSITIVE, id="s1"):
        instance = Instance(
            id=id,
            tokens=tuple(tokens.split()) if isinstance(tokens, str) else tokens,
            aspect_positions=tuple(aspect),
            label=label,
        )
        return encode_instance(instance, vocab)

    return _make


@pytest.fixture
def sentence(make_instance):
    return make_instance("the screen is huge and colorful but no backlight", [1])


@pytest.fixture
def params(vocab):
    return init_params(len(vocab), 6, make_rng(0, "params"), init_range=0.3)


def random_instance(vocab, rng, id="r"):
    """A random sentence of 3 to 7 tokens with a one- or two-word aspect."""
    n = int(rng.integers(3, 8))
    words = vocab.words[2:]
    tokens = tuple(str(w) for w in rng.choice(words, size=n))
    width = int(rng.integers(1, 3))
    start = int(rng.integers(0, n - width + 1))
    return encode_instance(
        Instance(
            id=id,
            tokens=tokens,
            aspect_positions=tuple(range(start, start + width)),
            label=Sentiment(int(rng.integers(0, 3))),
        ),
        vocab,
    )
