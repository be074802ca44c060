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

"""Training objectives, the mined corpus and the mini-batch Adam loop."""

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
import logging
from pathlib import Path

import numpy as np
from tqdm import tqdm

from .dataset import DatasetError, EncodedInstance, SupervisionState
from .evaluation import PredictionSet, accuracy, macro_f1
from .helpers import make_rng, read_jsonl, write_jsonl
from .memory_network import (
    ModelParams,
    Supervision,
    attention_penalty,
    loss_and_grads,
    predict,
    zero_grads,
)
from .models.config_types import TrainConfig
from .models.corpus_types import (
    EpochRecord,
    SupervisionRecord,
    SupervisionScope,
)
from .numerics import AdamState, NumericalError, adam_step

logger = logging.getLogger(__name__)

ExpectedDistribution = dict[int, float]


class DivergenceError(ValueError):
  """Raised when training produces a non-finite loss or parameter."""


def expected_distribution(
    s_a: Sequence[int], s_m: Sequence[int]
) -> ExpectedDistribution:
  """1/|s_a| on every active position and 0 on every misleading one."""
  overlap = set(s_a) & set(s_m)
  if overlap:
    raise ValueError(f"s_a and s_m overlap at {sorted(overlap)}")
  expected = {p: 1.0 / len(s_a) for p in s_a}
  expected.update({p: 0.0 for p in s_m})
  return expected


def regularizer(alpha: np.ndarray, expected: Mapping[int, float]) -> float:
  """Σ over listed positions of (α_p − α̂_p)²."""
  value, _ = attention_penalty(np.asarray(alpha), expected)
  return float(value)


# Mined corpus


class MinedCorpus:
  """Original instances joined with their supervision sets and α̂.

  `scope` restricts which sets feed α̂: "s_a" and "s_m" drop the other set
  entirely, as the ablation variants require.
  """

  def __init__(
      self,
      instances: Sequence[EncodedInstance],
      state: SupervisionState,
      scope: SupervisionScope = "both",
  ):
    self.instances = list(instances)
    self.state = state
    self.scope = scope
    self.expected: dict[str, ExpectedDistribution] = {}
    for inst in self.instances:
      s_a = state.active(inst.id) if scope != "s_m" else []
      s_m = state.misleading(inst.id) if scope != "s_a" else []
      self.expected[inst.id] = expected_distribution(s_a, s_m)

  def __len__(self) -> int:
    return len(self.instances)

  def restrict(self, scope: SupervisionScope) -> "MinedCorpus":
    return MinedCorpus(self.instances, self.state, scope)

  def to_records(self) -> list[SupervisionRecord]:
    return [
        SupervisionRecord(
            id=inst.id,
            s_a=self.state.active(inst.id),
            s_m=self.state.misleading(inst.id),
            expected=sorted(self.expected[inst.id].items()),
            scope=self.scope,
        )
        for inst in self.instances
    ]

  def save(self, path: Path) -> None:
    write_jsonl(Path(path), self.to_records())

  @classmethod
  def load(
      cls, path: Path, instances: Sequence[EncodedInstance]
  ) -> "MinedCorpus":
    """Reads a mined corpus and checks every stored α̂ against its sets.

    The corpus keeps the scope it was written with; records written with
    different scopes are rejected.
    """
    records = read_jsonl(Path(path), SupervisionRecord)
    scopes = sorted({record.scope for record in records})
    if len(scopes) > 1:
      raise DatasetError(f"{path}: records mix supervision scopes {scopes}")
    state = SupervisionState.from_records(instances, records)
    corpus = cls(instances, state, scopes[0] if scopes else "both")
    for record in records:
      if record.expected is None:
        continue
      stored = dict(record.expected)
      derived = corpus.expected[record.id]
      if stored.keys() != derived.keys() or any(
          not np.isclose(stored[p], derived[p], rtol=0, atol=1e-12)
          for p in stored
      ):
        raise DatasetError(
            f"{path}: record {record.id} has an inconsistent expected"
            " distribution"
        )
    return corpus


# Training loop


@dataclass
class TrainResult:
  params: ModelParams
  history: list[EpochRecord] = field(default_factory=list)
  best_epoch: int | None = None


def prediction_set(
    params: ModelParams, instances: Sequence[EncodedInstance]
) -> PredictionSet:
  return PredictionSet.build(
      [inst.id for inst in instances],
      [inst.label for inst in instances],
      predict(params, instances),
  )


def _batches(order: np.ndarray, size: int) -> Iterable[np.ndarray]:
  for start in range(0, len(order), size):
    yield order[start : start + size]


def train(
    params: ModelParams,
    corpus: Sequence[EncodedInstance],
    config: TrainConfig,
    validation: Sequence[EncodedInstance] | None = None,
    supervision: Mapping[str, ExpectedDistribution] | None = None,
    stream: str = "train",
) -> TrainResult:
  """Mini-batch Adam on cross-entropy, plus γ·Δ for supervised instances.

  Batches are drawn from a per-epoch shuffle and gradients are averaged
  over the batch. With a validation set, the epoch with the highest
  validation Macro-F1 is kept (the earlier one on ties) and training stops
  after `patience` epochs without improvement.

  Args:
      params: starting parameters; not modified.
      corpus: training instances.
      config: optimizer settings.
      validation: optional held-out instances for model selection.
      supervision: α̂ per instance id; instances without one get none.
      stream: name of the shuffle and dropout sub-streams.

  Returns:
      TrainResult: the selected parameters and the per-epoch history.

  Raises:
      DivergenceError: non-finite loss or parameters, with epoch and batch.
  """
  if not corpus:
    raise ValueError("cannot train on an empty corpus")
  dtype = np.dtype(config.dtype)
  params = params.astype(dtype)
  shuffle_rng = make_rng(config.seed, stream, "shuffle")
  dropout_rng = make_rng(config.seed, stream, "dropout")
  state = AdamState.zeros_like(params.as_dict())
  supervision = supervision or {}

  result = TrainResult(params=params)
  best_f1 = -1.0
  stale = 0
  epochs = tqdm(
      range(1, config.epochs + 1),
      desc="epochs",
      disable=not config.progress,
      leave=False,
  )
  for epoch in epochs:
    order = shuffle_rng.permutation(len(corpus))
    total_loss = 0.0
    for batch_id, batch in enumerate(_batches(order, config.batch_size)):
      grads = zero_grads(params)
      batch_loss = 0.0
      for idx in batch:
        inst = corpus[idx]
        expected = supervision.get(inst.id)
        try:
          loss, _ = loss_and_grads(
              params,
              inst,
              supervision=Supervision(expected, config.gamma)
              if expected
              else None,
              dropout=config.dropout,
              rng=dropout_rng,
              regularize_clean=not config.regularize_with_dropout,
              out=grads,
          )
        except NumericalError as e:
          raise DivergenceError(
              f"epoch {epoch} batch {batch_id}: {e}"
          ) from e
        batch_loss += float(loss)
      scale = dtype.type(1.0 / len(batch))
      for g in grads.values():
        g *= scale
      updated, state = adam_step(params.as_dict(), grads, state, config.lr)
      params = ModelParams.from_dict(updated)
      if not params.all_finite():
        raise DivergenceError(
            f"epoch {epoch} batch {batch_id}: non-finite parameters"
        )
      total_loss += batch_loss

    record = EpochRecord(epoch=epoch, train_loss=total_loss / len(corpus))
    if validation:
      preds = prediction_set(params, validation)
      record.val_accuracy = accuracy(preds)
      record.val_macro_f1 = macro_f1(preds)
    result.history.append(record)
    logger.info(
        f"epoch {epoch}: loss {record.train_loss:.4f}"
        + (
            f" val_acc {record.val_accuracy:.4f}"
            f" val_f1 {record.val_macro_f1:.4f}"
            if validation
            else ""
        )
    )

    if not validation:
      result.params = params
      result.best_epoch = epoch
      continue
    if record.val_macro_f1 > best_f1:
      best_f1 = record.val_macro_f1
      result.params = params
      result.best_epoch = epoch
      stale = 0
    else:
      stale += 1
      if stale >= config.patience:
        logger.info(
            f"Early stop after epoch {epoch}; best epoch {result.best_epoch}"
        )
        break
  return result


def train_supervised(
    params: ModelParams,
    corpus: MinedCorpus,
    config: TrainConfig,
    validation: Sequence[EncodedInstance] | None = None,
) -> TrainResult:
  """Cross-entropy plus γ·Δ against α̂ on the unmasked sentences."""
  return train(
      params, corpus.instances, config, validation, supervision=corpus.expected
  )


def write_history(path: Path, history: Iterable[EpochRecord]) -> None:
  write_jsonl(Path(path), history)
