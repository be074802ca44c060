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

"""Record types for corpora, supervision state and run artifacts."""

from enum import IntEnum
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


SupervisionScope = Literal["both", "s_a", "s_m"]


class Sentiment(IntEnum):
  """Sentiment polarity with stable integer codes."""

  POSITIVE = 0
  NEGATIVE = 1
  NEUTRAL = 2


class CorpusModel(BaseModel):
  """Base class for all records persisted as JSON lines."""

  model_config = ConfigDict(
      populate_by_name=True, serialize_by_alias=True, extra="forbid"
  )


class Instance(CorpusModel):
  """One (sentence, aspect, label) triple in the normalized corpus format."""

  model_config = ConfigDict(frozen=True)

  id: str
  tokens: tuple[str, ...] = Field(min_length=1)
  aspect_positions: tuple[int, ...] = Field(alias="aspect", min_length=1)
  label: Sentiment

  @model_validator(mode="after")
  def _check_aspect(self) -> "Instance":
    n = len(self.tokens)
    for pos in self.aspect_positions:
      if not 0 <= pos < n:
        raise ValueError(
            f"Instance {self.id}: aspect position {pos} out of range [0, {n})"
        )
    if len(set(self.aspect_positions)) != len(self.aspect_positions):
      raise ValueError(f"Instance {self.id}: duplicate aspect positions")
    return self

  @property
  def aspect_words(self) -> tuple[str, ...]:
    return tuple(self.tokens[p] for p in self.aspect_positions)


class SupervisionRecord(CorpusModel):
  """Extracted positions of one instance.

  `s_a` holds context words with active effects, `s_m` those with misleading
  effects, both in extraction order. `expected` is only present on records
  written as part of a mined corpus and maps position to expected weight.
  `scope` names the sets `expected` was derived from.
  """

  id: str
  s_a: list[int] = Field(default_factory=list)
  s_m: list[int] = Field(default_factory=list)
  expected: list[tuple[int, float]] | None = None
  scope: SupervisionScope = "both"

  @model_validator(mode="after")
  def _check_disjoint(self) -> "SupervisionRecord":
    if set(self.s_a) & set(self.s_m):
      raise ValueError(f"Record {self.id}: s_a and s_m overlap")
    if len(set(self.s_a)) != len(self.s_a) or len(set(self.s_m)) != len(
        self.s_m
    ):
      raise ValueError(f"Record {self.id}: repeated extracted position")
    return self


class MiningLogEntry(CorpusModel):
  """One (iteration, instance) decision of the mining loop."""

  k: int = Field(ge=1)
  id: str
  entropy: float | None = None
  y: Sentiment
  y_p: Sentiment | None = None
  status: Literal["extracted", "gated", "exhausted"]
  position: int | None = None
  word: str | None = None
  destination: Literal["s_a", "s_m"] | None = None
  masked: list[int] = Field(default_factory=list)
  saliency: list[float] = Field(default_factory=list)


class EpochRecord(CorpusModel):
  """One line of a training history file."""

  epoch: int = Field(ge=1)
  train_loss: float
  val_accuracy: float | None = None
  val_macro_f1: float | None = None


class ClassScores(CorpusModel):
  precision: float
  recall: float
  f1: float
  support: int


class MetricsReport(CorpusModel):
  """Accuracy, Macro-F1 and per-class scores of one system on one split."""

  system: str
  split: str
  size: int
  accuracy: float
  macro_f1: float
  per_class: dict[str, ClassScores]
  p_values: dict[str, float] | None = None


class IterationSummary(CorpusModel):
  """Counts of mining decisions in one iteration."""

  k: int = Field(ge=1)
  gate_open: int = 0
  to_s_a: int = 0
  to_s_m: int = 0
  gated: int = 0
  exhausted: int = 0


class SplitManifest(CorpusModel):
  """Written by `prepare` next to the normalized corpus files."""

  dataset: str
  format: str
  seed: int
  validation_fraction: float
  train_sha256: str
  test_sha256: str
  vocab_sha256: str
  validation_ids: list[str]
  counts: dict[str, str]


class RunManifest(CorpusModel):
  """Links a run directory to the prepared dataset it was built from."""

  dataset_dir: str
  mode: str
  corpus_sha256: str
  vocab_sha256: str
