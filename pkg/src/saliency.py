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

"""Per-position influence scores of context words."""

from collections.abc import Collection
from dataclasses import dataclass
import logging

import numpy as np

from .dataset import EncodedInstance
from .memory_network import (
    ForwardTrace,
    ModelParams,
    eligible_positions,
    forward,
)
from .models.config_types import SaliencyMode
from .numerics import NumericalError, gaussian_noise

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SaliencyVector:
  """A distribution over token positions, zero on ineligible positions.

  `fallback` is set when the scores carried no signal and a uniform
  distribution over eligible positions was substituted.
  """

  scores: np.ndarray
  mode: SaliencyMode
  fallback: bool = False

  def argmax(self) -> int:
    """Most influential position; ties go to the lowest index."""
    return int(np.argmax(self.scores))


def saliency_aw(trace: ForwardTrace) -> SaliencyVector:
  """Attention weights as saliency."""
  return SaliencyVector(
      scores=trace.alpha.astype(np.float64, copy=True), mode="aw"
  )


def normalize_abs(raw: np.ndarray, eligible: Collection[int]) -> np.ndarray:
  """|raw_i| / Σ_eligible |raw_j| on eligible positions, 0 elsewhere.

  Raises:
      NumericalError: no eligible position, or all eligible scores are 0.
  """
  idx = np.asarray(sorted(eligible), dtype=np.int64)
  if idx.size == 0:
    raise NumericalError("empty support")
  raw = np.asarray(raw, dtype=np.float64)
  mag = np.abs(raw[idx])
  total = mag.sum()
  if total == 0:
    raise NumericalError("all-zero scores")
  out = np.zeros(raw.shape[0], dtype=np.float64)
  out[idx] = mag / total
  return out


def gradient_times_input(
    params: ModelParams,
    instance: EncodedInstance,
    trace: ForwardTrace,
    target: int,
) -> np.ndarray:
  """g_i · h_i for every position, with g_i = ∂ log p(target) / ∂h_i.

  Only eligible positions are non-zero; h is the (possibly noisy) context
  row stored in the trace.
  """
  dlogits = -trace.probs.copy()
  dlogits[target] += 1
  dsentence = params.output_weight.T @ dlogits
  eligible = trace.eligible
  grads = np.outer(trace.alpha[eligible], dsentence)
  raw = np.zeros(len(instance), dtype=np.float64)
  raw[eligible] = np.einsum("ij,ij->i", grads, trace.context)
  return raw


def saliency_pg(
    params: ModelParams,
    instance: EncodedInstance,
    masked_positions: Collection[int] = (),
    n: int = 8,
    sigma: float = 0.01,
    rng: np.random.Generator | None = None,
) -> SaliencyVector:
  """Noise-averaged gradient×input saliency.

  For each of `n` samples, N(0, σ²) noise is added to the context rows of
  the eligible positions, log p of the class predicted on the clean input is
  differentiated w.r.t. those rows, and the per-position gradient·input
  magnitudes are normalized to sum to 1. The sample distributions are then
  averaged and renormalized. Dropout is off throughout.

  Args:
      params: parameters; not modified.
      instance: encoded instance.
      masked_positions: extra positions excluded from attention.
      n: number of noise samples.
      sigma: noise standard deviation.
      rng: noise source; required when sigma > 0.

  Returns:
      SaliencyVector: mode "pg".
  """
  if n < 1:
    raise ValueError(f"n must be >= 1, got {n}")
  if sigma > 0 and rng is None:
    raise ValueError("noise requires an rng")
  rng = rng if rng is not None else np.random.default_rng(0)
  eligible = eligible_positions(instance, masked_positions)
  predicted = forward(params, instance, masked_positions).prediction

  total = np.zeros(len(instance), dtype=np.float64)
  fallback = False
  for _ in range(n):
    noise = gaussian_noise((len(instance), params.dim), sigma, rng)
    noise[np.setdiff1d(np.arange(len(instance)), eligible)] = 0
    trace = forward(params, instance, masked_positions, context_noise=noise)
    raw = gradient_times_input(params, instance, trace, predicted)
    try:
      total += normalize_abs(raw, eligible)
    except NumericalError:
      fallback = True
      total[eligible] += 1.0 / eligible.size

  if fallback:
    logger.warning(
        f"Instance {instance.id}: saliency has no signal, using uniform scores"
    )
  return SaliencyVector(
      scores=total / total.sum(), mode="pg", fallback=fallback
  )


def compute_saliency(
    mode: SaliencyMode,
    params: ModelParams,
    instance: EncodedInstance,
    masked_positions: Collection[int] = (),
    n: int = 8,
    sigma: float = 0.01,
    rng: np.random.Generator | None = None,
    trace: ForwardTrace | None = None,
) -> SaliencyVector:
  if mode == "aw":
    trace = trace if trace is not None else forward(
        params, instance, masked_positions
    )
    return saliency_aw(trace)
  return saliency_pg(params, instance, masked_positions, n, sigma, rng)
