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

"""Accuracy, Macro-F1 and paired bootstrap significance tests."""

from collections.abc import Sequence
from dataclasses import dataclass
import logging

import numpy as np
from sklearn.metrics import (
    accuracy_score,
    f1_score,
    precision_recall_fscore_support,
)

from . import constants
from .models.corpus_types import ClassScores, MetricsReport

logger = logging.getLogger(__name__)

_LABELS = list(range(constants.NUM_CLASSES))


@dataclass(frozen=True)
class PredictionSet:
  """Parallel ids, gold labels and predicted labels of one system."""

  ids: tuple[str, ...]
  gold: np.ndarray
  predicted: np.ndarray

  def __post_init__(self):
    if not len(self.ids) == len(self.gold) == len(self.predicted):
      raise ValueError(
          f"length mismatch: {len(self.ids)} ids, {len(self.gold)} gold,"
          f" {len(self.predicted)} predicted"
      )
    if len(set(self.ids)) != len(self.ids):
      raise ValueError("prediction ids are not unique")

  @classmethod
  def build(
      cls, ids: Sequence[str], gold: Sequence[int], predicted: Sequence[int]
  ) -> "PredictionSet":
    return cls(
        ids=tuple(ids),
        gold=np.asarray(gold, dtype=np.int64),
        predicted=np.asarray(predicted, dtype=np.int64),
    )

  def __len__(self) -> int:
    return len(self.ids)

  def aligned_to(self, ids: Sequence[str]) -> "PredictionSet":
    """Reorders this set to follow `ids`, which must hold the same ids."""
    if set(ids) != set(self.ids) or len(ids) != len(self.ids):
      raise ValueError("prediction sets cover different instance ids")
    where = {i: k for k, i in enumerate(self.ids)}
    order = np.array([where[i] for i in ids], dtype=np.int64)
    return PredictionSet(tuple(ids), self.gold[order], self.predicted[order])


def _check_nonempty(preds: PredictionSet) -> None:
  if len(preds) == 0:
    raise ValueError("cannot score an empty prediction set")


def accuracy(preds: PredictionSet) -> float:
  _check_nonempty(preds)
  return float(accuracy_score(preds.gold, preds.predicted))


def macro_f1(preds: PredictionSet) -> float:
  """Unweighted mean of the three per-class F1 scores.

  A class with no gold and no predicted instance scores 0.
  """
  _check_nonempty(preds)
  return float(
      f1_score(
          preds.gold,
          preds.predicted,
          labels=_LABELS,
          average="macro",
          zero_division=0,
      )
  )


def per_class_scores(preds: PredictionSet) -> dict[str, ClassScores]:
  _check_nonempty(preds)
  p, r, f, s = precision_recall_fscore_support(
      preds.gold, preds.predicted, labels=_LABELS, zero_division=0
  )
  return {
      name: ClassScores(
          precision=float(p[i]),
          recall=float(r[i]),
          f1=float(f[i]),
          support=int(s[i]),
      )
      for i, name in enumerate(constants.LABEL_NAMES)
  }


def bootstrap_test(
    system_a: PredictionSet,
    system_b: PredictionSet,
    n: int = constants.DEFAULT_BOOTSTRAP_SAMPLES,
    rng: np.random.Generator | None = None,
) -> dict[str, float]:
  """Paired bootstrap test of system_a against system_b.

  Both systems are scored on the same resampled index sets. For each metric
  the p-value is the fraction of resamples where system_a does not score
  strictly higher than system_b.

  Args:
      system_a: candidate system.
      system_b: reference system over the same ids.
      n: number of resamples.
      rng: resampling source.

  Returns:
      dict[str, float]: p-values keyed "accuracy" and "macro_f1".
  """
  _check_nonempty(system_a)
  system_b = system_b.aligned_to(system_a.ids)
  if not np.array_equal(system_a.gold, system_b.gold):
    raise ValueError("prediction sets disagree on gold labels")
  rng = rng if rng is not None else np.random.default_rng(0)
  size = len(system_a)
  samples = rng.integers(0, size, size=(n, size))

  not_better = {"accuracy": 0, "macro_f1": 0}
  for idx in samples:
    gold = system_a.gold[idx]
    a = system_a.predicted[idx]
    b = system_b.predicted[idx]
    if not accuracy_score(gold, a) > accuracy_score(gold, b):
      not_better["accuracy"] += 1
    f_a = f1_score(gold, a, labels=_LABELS, average="macro", zero_division=0)
    f_b = f1_score(gold, b, labels=_LABELS, average="macro", zero_division=0)
    if not f_a > f_b:
      not_better["macro_f1"] += 1
  return {k: v / n for k, v in not_better.items()}


def metrics_report(
    preds: PredictionSet,
    system: str,
    split: str = "test",
    p_values: dict[str, float] | None = None,
) -> MetricsReport:
  return MetricsReport(
      system=system,
      split=split,
      size=len(preds),
      accuracy=accuracy(preds),
      macro_f1=macro_f1(preds),
      per_class=per_class_scores(preds),
      p_values=p_values,
  )


def format_metrics(report: MetricsReport) -> str:
  """Renders a metrics report as aligned plain text."""
  lines = [
      f"system: {report.system}",
      f"split: {report.split} ({report.size} instances)",
      f"accuracy: {report.accuracy:.4f}",
      f"macro_f1: {report.macro_f1:.4f}",
      f"{'class':<10}{'precision':>10}{'recall':>10}{'f1':>10}{'support':>9}",
  ]
  for name, s in report.per_class.items():
    lines.append(
        f"{name:<10}{s.precision:>10.4f}{s.recall:>10.4f}{s.f1:>10.4f}"
        f"{s.support:>9d}"
    )
  if report.p_values:
    for metric, p in report.p_values.items():
      lines.append(f"p_value[{metric}]: {p:.4f}")
  return "\n".join(lines) + "\n"
