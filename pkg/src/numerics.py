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

"""Dense-tensor utilities: masked softmax, entropy, Adam, gradient checks."""

from collections.abc import Callable, Collection, Mapping
from dataclasses import dataclass, field

import numpy as np

Tensors = dict[str, np.ndarray]
LossFn = Callable[
    [Mapping[str, np.ndarray]], tuple[float, Mapping[str, np.ndarray]]
]


class NumericalError(ValueError):
  """Raised on empty supports, invalid distributions or non-finite values."""


def softmax(
    scores: np.ndarray, excluded: Collection[int] = ()
) -> np.ndarray:
  """Softmax over the non-excluded entries of a 1-D score vector.

  Excluded indices get probability exactly 0. The max of the remaining
  scores is subtracted before exponentiation.

  Args:
      scores: finite scores.
      excluded: indices kept out of the support.

  Returns:
      np.ndarray: probabilities, same shape and dtype as `scores`.
  """
  scores = np.asarray(scores)
  if scores.ndim != 1:
    raise NumericalError(f"softmax expects a vector, got shape {scores.shape}")
  support = np.ones(scores.shape[0], dtype=bool)
  for i in excluded:
    support[i] = False
  if not support.any():
    raise NumericalError("empty support")
  if not np.all(np.isfinite(scores[support])):
    raise NumericalError("numerical failure: non-finite scores")
  dtype = scores.dtype
  if not np.issubdtype(dtype, np.floating):
    dtype = np.float64
  out = np.zeros(scores.shape[0], dtype=dtype)
  kept = scores[support].astype(dtype, copy=False)
  exp = np.exp(kept - kept.max())
  out[support] = exp / exp.sum()
  return out


def entropy(dist: np.ndarray) -> float:
  """Natural-log Shannon entropy, with 0 log 0 = 0."""
  dist = np.asarray(dist, dtype=np.float64)
  if np.any(dist < 0):
    raise NumericalError("invalid distribution: negative probability")
  if abs(dist.sum() - 1.0) > 1e-6:
    raise NumericalError(f"invalid distribution: sums to {dist.sum():.8f}")
  nz = dist[dist > 0]
  return float(max(0.0, -np.sum(nz * np.log(nz))))


def gaussian_noise(
    shape: tuple[int, ...], sigma: float, rng: np.random.Generator
) -> np.ndarray:
  """I.i.d. N(0, sigma^2) samples.

  Always draws from `rng`, so the stream advances the same way for any
  sigma, including 0 (which yields zeros).
  """
  if sigma < 0:
    raise NumericalError(f"sigma must be non-negative, got {sigma}")
  return sigma * rng.standard_normal(shape)


@dataclass
class AdamState:
  """First/second moments per tensor and the step counter."""

  m: Tensors = field(default_factory=dict)
  v: Tensors = field(default_factory=dict)
  t: int = 0
  beta1: float = 0.9
  beta2: float = 0.999
  eps: float = 1e-8

  @classmethod
  def zeros_like(
      cls, params: Mapping[str, np.ndarray], **kwargs
  ) -> "AdamState":
    return cls(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        **kwargs,
    )


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[Tensors, AdamState]:
  """One bias-corrected Adam update.

  Parameters are not modified; new arrays are returned. The moments in
  `state` are updated in place, so a state must have a single writer.

  Args:
      params: tensors keyed by name.
      grads: gradients with the same keys and shapes.
      state: optimizer state; created lazily for missing keys.
      lr: learning rate.

  Returns:
      tuple[Tensors, AdamState]: updated parameters and the same state.
  """
  if lr <= 0:
    raise NumericalError(f"learning rate must be positive, got {lr}")
  if set(params) != set(grads):
    raise NumericalError(
        f"gradient keys {sorted(grads)} do not match"
        f" parameters {sorted(params)}"
    )
  state.t += 1
  b1, b2 = state.beta1, state.beta2
  correction1 = 1.0 - b1**state.t
  correction2 = 1.0 - b2**state.t
  updated = {}
  for name, p in params.items():
    g = grads[name]
    if g.shape != p.shape:
      raise NumericalError(
          f"shape mismatch for {name}: grad {g.shape} vs param {p.shape}"
      )
    if name not in state.m:
      state.m[name] = np.zeros_like(p)
      state.v[name] = np.zeros_like(p)
    m = state.m[name]
    v = state.v[name]
    m *= b1
    m += (1.0 - b1) * g
    v *= b2
    v += (1.0 - b2) * (g * g)
    m_hat = m / correction1
    v_hat = v / correction2
    updated[name] = p - lr * m_hat / (np.sqrt(v_hat) + state.eps)
  return updated, state


def check_gradient(
    loss_fn: LossFn,
    params: Mapping[str, np.ndarray],
    h: float = 1e-5,
    rng: np.random.Generator | None = None,
    max_coords: int = 100,
    dtype: type[np.floating] = np.float64,
) -> float:
  """Max relative error between analytic and central-difference gradients.

  Up to `max_coords` coordinates per tensor are sampled uniformly without
  replacement. The point is evaluated in `dtype`: float64 at least, or
  `np.longdouble` where the platform has extended precision and the checked
  gradients are small enough for float64 round-off to matter.

  Args:
      loss_fn: maps a parameter dict to (loss, gradient dict).
      params: point to check at; not modified.
      h: perturbation, in [1e-6, 1e-4].
      rng: coordinate sampler; defaults to a fixed-seed generator.
      max_coords: per-tensor cap on checked coordinates.
      dtype: floating type the loss is evaluated in.

  Returns:
      float: max over checked coordinates of
      |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
  """
  if not 1e-6 <= h <= 1e-4:
    raise NumericalError(f"perturbation h={h} outside [1e-6, 1e-4]")
  rng = rng if rng is not None else np.random.default_rng(0)
  point = {k: np.array(v, dtype=dtype, copy=True) for k, v in params.items()}
  loss, analytic = loss_fn(point)
  if not np.isfinite(loss):
    raise NumericalError("unstable point")

  worst = 0.0
  for name in sorted(point):
    tensor = point[name]
    size = tensor.size
    picks = rng.choice(size, size=min(size, max_coords), replace=False)
    flat = tensor.reshape(-1)
    grad_flat = np.asarray(analytic[name], dtype=dtype).reshape(-1)
    for idx in np.sort(picks):
      original = flat[idx]
      flat[idx] = original + h
      plus, _ = loss_fn(point)
      flat[idx] = original - h
      minus, _ = loss_fn(point)
      flat[idx] = original
      if not (np.isfinite(plus) and np.isfinite(minus)):
        raise NumericalError("unstable point")
      numeric = (plus - minus) / (2 * dtype(h))
      a = grad_flat[idx]
      denom = max(abs(a), abs(numeric), 1e-8)
      worst = max(worst, float(abs(a - numeric) / denom))
  return float(worst)
