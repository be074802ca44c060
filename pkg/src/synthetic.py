# Copyright 2026 The absa-attention-supervision Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""A generated corpus with a frequent, misleading distractor word.

The label of a sentence is carried by one cue word drawn from a large
per-label pool, so every cue is rare (a few occurrences in training). The
distractor ("huge") is frequent and sits almost only in Positive training
sentences. Test sentences all contain the distractor next to a cue of their
own label, so a model that learned to attend to the distractor calls most
Negative and Neutral test sentences Positive.

Each sentence holds a single filler word. Once the distractor and the cue
have been mined, at most one context word is left, so filler words are
never extracted on their own.
"""

from dataclasses import dataclass
from functools import cache

import numpy as np

from .helpers import make_rng
from .models.corpus_types import Instance, Sentiment

DISTRACTOR = "huge"
ASPECTS = ("screen", "battery", "keyboard", "speaker", "camera", "case")
FILLERS = ("the", "is", "and", "it", "this", "with", "a", "was", "my", "so")
CUE_STEMS = {
    Sentiment.POSITIVE: "good",
    Sentiment.NEGATIVE: "bad",
    Sentiment.NEUTRAL: "plain",
}


@cache
def cue_words(label: Sentiment, n: int) -> tuple[str, ...]:
  """The `n` cue words of `label`, e.g. good00 .. good59."""
  return tuple(f"{CUE_STEMS[label]}{i:02d}" for i in range(n))


@dataclass(frozen=True)
class SyntheticConfig:
  """Sizes and distractor rates; rates are per gold label in training.

  With the defaults 90% of the training sentences that contain the
  distractor are Positive.
  """

  n_train: int = 600
  n_test: int = 300
  cues_per_label: int = 60
  distractor_rate_positive: float = 0.9
  distractor_rate_other: float = 0.05
  fillers_per_sentence: int = 1


def _sentence(
    rng: np.random.Generator,
    label: Sentiment,
    with_distractor: bool,
    config: SyntheticConfig,
) -> tuple[tuple[str, ...], tuple[int, ...]]:
  words = [str(rng.choice(cue_words(label, config.cues_per_label)))]
  if with_distractor:
    words.append(DISTRACTOR)
  words += [
      str(w) for w in rng.choice(FILLERS, size=config.fillers_per_sentence)
  ]
  words = [words[i] for i in rng.permutation(len(words))]
  aspect_at = int(rng.integers(0, len(words) + 1))
  tokens = words[:aspect_at] + [str(rng.choice(ASPECTS))] + words[aspect_at:]
  return tuple(tokens), (aspect_at,)


def generate(
    seed: int = 0, config: SyntheticConfig | None = None
) -> tuple[list[Instance], list[Instance]]:
  """Generates (train, test) instances; the same seed gives the same corpus.

  Labels are uniform over the three classes in both splits. A training
  sentence contains the distractor with `distractor_rate_positive` when
  Positive and `distractor_rate_other` otherwise. Every test sentence
  contains it.
  """
  config = config or SyntheticConfig()
  splits = []
  for split, size in (("train", config.n_train), ("test", config.n_test)):
    rng = make_rng(seed, "synthetic", split)
    instances = []
    for i in range(size):
      label = Sentiment(int(rng.integers(0, 3)))
      if split == "test":
        with_distractor = True
      else:
        rate = (
            config.distractor_rate_positive
            if label == Sentiment.POSITIVE
            else config.distractor_rate_other
        )
        with_distractor = bool(rng.random() < rate)
      tokens, aspect = _sentence(rng, label, with_distractor, config)
      instances.append(
          Instance(
              id=f"synthetic-{split}-{i}",
              tokens=tokens,
              aspect_positions=aspect,
              label=label,
          )
      )
    splits.append(instances)
  return splits[0], splits[1]
