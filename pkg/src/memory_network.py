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

"""Single-hop memory network for aspect sentiment, with analytic gradients.

  v  = mean of aspect-embedding rows of the aspect tokens
  mᵢ = memory-embedding row, hᵢ = context-embedding row of token i
  αᵢ = softmax over eligible i of vᵀ M mᵢ
  o  = Σ αᵢ hᵢ
  p  = softmax(W_o (o + v) + b_o)

Eligible positions are those that are neither aspect positions, nor listed
as masked, nor carry the `<mask>` token.
"""

from collections.abc import Collection, Mapping, Sequence
from dataclasses import dataclass, fields

import numpy as np

from . import constants
from .dataset import EncodedInstance
from .numerics import NumericalError, Tensors, softmax

PARAM_NAMES = (
    "aspect_embedding",
    "memory_embedding",
    "context_embedding",
    "attention",
    "output_weight",
    "output_bias",
)


class FullyMaskedError(ValueError):
  """Raised when an instance has no position left to attend to."""


@dataclass(frozen=True)
class ModelParams:
  """All trainable tensors. Treated as immutable; updates build new params."""

  aspect_embedding: np.ndarray
  memory_embedding: np.ndarray
  context_embedding: np.ndarray
  attention: np.ndarray
  output_weight: np.ndarray
  output_bias: np.ndarray

  def __post_init__(self):
    v, d = self.aspect_embedding.shape
    expected = {
        "memory_embedding": (v, d),
        "context_embedding": (v, d),
        "attention": (d, d),
        "output_weight": (constants.NUM_CLASSES, d),
        "output_bias": (constants.NUM_CLASSES,),
    }
    for name, shape in expected.items():
      actual = getattr(self, name).shape
      if actual != shape:
        raise ValueError(f"{name} has shape {actual}, expected {shape}")

  @property
  def dim(self) -> int:
    return int(self.aspect_embedding.shape[1])

  @property
  def vocab_size(self) -> int:
    return int(self.aspect_embedding.shape[0])

  @property
  def dtype(self) -> np.dtype:
    return self.aspect_embedding.dtype

  def as_dict(self) -> Tensors:
    return {f.name: getattr(self, f.name) for f in fields(self)}

  @classmethod
  def from_dict(cls, tensors: Mapping[str, np.ndarray]) -> "ModelParams":
    return cls(**{name: tensors[name] for name in PARAM_NAMES})

  def astype(self, dtype) -> "ModelParams":
    return ModelParams.from_dict(
        {k: v.astype(dtype) for k, v in self.as_dict().items()}
    )

  def all_finite(self) -> bool:
    return all(np.all(np.isfinite(v)) for v in self.as_dict().values())


def init_params(
    vocab_size: int,
    dim: int,
    rng: np.random.Generator,
    embeddings: np.ndarray | None = None,
    init_range: float = constants.PARAM_INIT_RANGE,
    dtype=np.float64,
) -> ModelParams:
  """Initializes parameters.

  The three embedding matrices start from `embeddings` when given (pre-trained
  rows plus Uniform[-0.25, 0.25] out-of-vocabulary rows), otherwise each is
  drawn from Uniform[-0.25, 0.25]. M, W_o and b_o are drawn from
  Uniform[-init_range, init_range].
  """
  r = constants.EMBEDDING_OOV_RANGE
  if embeddings is not None:
    if embeddings.shape != (vocab_size, dim):
      raise ValueError(
          f"embeddings have shape {embeddings.shape}, expected"
          f" {(vocab_size, dim)}"
      )
    tables = [embeddings.astype(dtype, copy=True) for _ in range(3)]
  else:
    tables = [
        rng.uniform(-r, r, size=(vocab_size, dim)).astype(dtype)
        for _ in range(3)
    ]
  c = init_range
  return ModelParams(
      aspect_embedding=tables[0],
      memory_embedding=tables[1],
      context_embedding=tables[2],
      attention=rng.uniform(-c, c, size=(dim, dim)).astype(dtype),
      output_weight=rng.uniform(
          -c, c, size=(constants.NUM_CLASSES, dim)
      ).astype(dtype),
      output_bias=rng.uniform(-c, c, size=constants.NUM_CLASSES).astype(dtype),
  )


@dataclass
class ForwardTrace:
  """Forward results plus the intermediates the backward pass needs.

  `eligible` lists attended positions; rows of `memory`, `context` and the
  dropout masks follow that order. `alpha` spans all token positions.
  """

  eligible: np.ndarray
  alpha: np.ndarray
  aspect_vec: np.ndarray
  query: np.ndarray
  memory: np.ndarray
  context: np.ndarray
  sentence_vec: np.ndarray
  joint: np.ndarray
  logits: np.ndarray
  probs: np.ndarray
  memory_mask: np.ndarray | None = None
  context_mask: np.ndarray | None = None
  joint_mask: np.ndarray | None = None

  @property
  def prediction(self) -> int:
    return int(np.argmax(self.probs))


def eligible_positions(
    instance: EncodedInstance, masked_positions: Collection[int] = ()
) -> np.ndarray:
  excluded = set(instance.aspect_positions) | set(masked_positions)
  return np.array(
      [
          i
          for i in range(len(instance))
          if i not in excluded and instance.token_ids[i] != constants.MASK_ID
      ],
      dtype=np.int64,
  )


def aspect_repr(params: ModelParams, instance: EncodedInstance) -> np.ndarray:
  """Mean of the aspect-embedding rows of the aspect tokens."""
  ids = instance.token_ids[list(instance.aspect_positions)]
  return params.aspect_embedding[ids].mean(axis=0)


def _dropout_mask(
    shape: tuple[int, ...], rate: float, rng: np.random.Generator, dtype
) -> np.ndarray:
  keep = 1.0 - rate
  return ((rng.random(shape) < keep) / keep).astype(dtype)


def forward(
    params: ModelParams,
    instance: EncodedInstance,
    masked_positions: Collection[int] = (),
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    context_noise: np.ndarray | None = None,
) -> ForwardTrace:
  """Runs the classifier on one instance.

  Args:
      params: parameters; not modified.
      instance: encoded instance.
      masked_positions: extra positions to exclude from attention.
      dropout: inverted-dropout rate on memory/context rows and on o + v;
        0 disables dropout.
      rng: dropout mask source, required when dropout > 0.
      context_noise: optional (N, d) additive noise on the context rows.

  A sentence made only of aspect words has no context: its attention is all
  zero and o is the zero vector, so the prediction comes from v alone.

  Returns:
      ForwardTrace: attention, prediction and cached intermediates.

  Raises:
      FullyMaskedError: masking removed every context word.
  """
  eligible = eligible_positions(instance, masked_positions)
  if eligible.size == 0 and len(instance.aspect_positions) < len(instance):
    raise FullyMaskedError(f"Instance {instance.id}: fully masked")
  if dropout > 0 and rng is None:
    raise ValueError("dropout requires an rng")
  dtype = params.dtype
  ids = instance.token_ids[eligible]

  v = aspect_repr(params, instance)
  m = params.memory_embedding[ids]
  h = params.context_embedding[ids]
  if context_noise is not None:
    h = h + context_noise[eligible].astype(dtype)
  memory_mask = context_mask = joint_mask = None
  if dropout > 0:
    memory_mask = _dropout_mask(m.shape, dropout, rng, dtype)
    context_mask = _dropout_mask(h.shape, dropout, rng, dtype)
    m = m * memory_mask
    h = h * context_mask

  q = params.attention.T @ v
  # An aspect-only sentence has no context; o is then the zero vector.
  weights = softmax(m @ q) if eligible.size else np.zeros(0, dtype=dtype)
  alpha = np.zeros(len(instance), dtype=weights.dtype)
  alpha[eligible] = weights
  o = weights @ h
  joint = o + v
  if dropout > 0:
    joint_mask = _dropout_mask(joint.shape, dropout, rng, dtype)
    joint = joint * joint_mask
  logits = params.output_weight @ joint + params.output_bias
  probs = softmax(logits)
  return ForwardTrace(
      eligible=eligible,
      alpha=alpha,
      aspect_vec=v,
      query=q,
      memory=m,
      context=h,
      sentence_vec=o,
      joint=joint,
      logits=logits,
      probs=probs,
      memory_mask=memory_mask,
      context_mask=context_mask,
      joint_mask=joint_mask,
  )


def zero_grads(params: ModelParams) -> Tensors:
  return {k: np.zeros_like(v) for k, v in params.as_dict().items()}


def backward(
    params: ModelParams,
    instance: EncodedInstance,
    trace: ForwardTrace,
    dlogits: np.ndarray,
    dalpha: np.ndarray | None = None,
    out: Tensors | None = None,
) -> Tensors:
  """Back-propagates into every parameter tensor.

  Args:
      params: parameters the trace was computed with.
      instance: the encoded instance.
      trace: forward trace.
      dlogits: gradient of the objective w.r.t. the logits.
      dalpha: extra gradient w.r.t. the full attention vector, if any.
      out: gradient buffers to add into; allocated when None.

  Returns:
      Tensors: `out` with this instance's gradients added.
  """
  out = out if out is not None else zero_grads(params)
  ids = instance.token_ids
  eligible = trace.eligible
  a = trace.alpha[eligible]

  out["output_weight"] += np.outer(dlogits, trace.joint)
  out["output_bias"] += dlogits
  djoint = params.output_weight.T @ dlogits
  if trace.joint_mask is not None:
    djoint = djoint * trace.joint_mask
  dv = djoint.copy()

  dcontext = np.outer(a, djoint)
  if trace.context_mask is not None:
    dcontext *= trace.context_mask
  np.add.at(out["context_embedding"], ids[eligible], dcontext)

  da = trace.context @ djoint
  if dalpha is not None:
    da = da + dalpha[eligible]
  dscores = a * (da - a @ da)
  dmemory = np.outer(dscores, trace.query)
  if trace.memory_mask is not None:
    dmemory *= trace.memory_mask
  np.add.at(out["memory_embedding"], ids[eligible], dmemory)

  dquery = dscores @ trace.memory
  out["attention"] += np.outer(trace.aspect_vec, dquery)
  dv += params.attention @ dquery
  aspect_ids = ids[list(instance.aspect_positions)]
  np.add.at(
      out["aspect_embedding"],
      aspect_ids,
      np.broadcast_to(dv / len(aspect_ids), (len(aspect_ids), dv.shape[0])),
  )
  return out


def attention_penalty(
    alpha: np.ndarray, expected: Mapping[int, float]
) -> tuple[float, np.ndarray]:
  """Squared distance between attention and expected weights.

  Returns:
      tuple[float, np.ndarray]: the penalty and its gradient w.r.t. `alpha`.
  """
  grad = np.zeros_like(alpha)
  value = alpha.dtype.type(0)
  for pos, target in expected.items():
    diff = alpha[pos] - target
    value += diff * diff
    grad[pos] = 2 * diff
  return value, grad


def _cross_entropy(
    logits: np.ndarray, probs: np.ndarray, label: int
) -> tuple[np.floating, np.ndarray]:
  shift = logits.max()
  lse = shift + np.log(np.exp(logits - shift).sum())
  dlogits = probs.copy()
  dlogits[label] -= 1
  return lse - logits[label], dlogits


@dataclass(frozen=True)
class Supervision:
  """Expected attention weights for one instance and the penalty weight γ."""

  expected: Mapping[int, float]
  gamma: float


def loss_and_grads(
    params: ModelParams,
    instance: EncodedInstance,
    masked_positions: Collection[int] = (),
    supervision: Supervision | None = None,
    dropout: float = 0.0,
    rng: np.random.Generator | None = None,
    regularize_clean: bool = False,
    out: Tensors | None = None,
) -> tuple[np.floating, Tensors]:
  """Cross-entropy (plus γ·penalty when supervised) and its gradients.

  Args:
      params: parameters; not modified.
      instance: labelled encoded instance.
      masked_positions: extra positions excluded from attention.
      supervision: expected attention weights and γ, or None.
      dropout: dropout rate for the training forward.
      rng: dropout mask source.
      regularize_clean: take the penalty on a dropout-free forward instead of
        the training forward.
      out: gradient buffers to accumulate into.

  Returns:
      tuple: (loss, gradients). The loss keeps the params' floating type.
  """
  trace = forward(params, instance, masked_positions, dropout=dropout, rng=rng)
  loss, dlogits = _cross_entropy(trace.logits, trace.probs, instance.label)
  out = out if out is not None else zero_grads(params)

  penalised = supervision is not None and supervision.gamma > 0 and bool(
      supervision.expected
  )
  if penalised and (regularize_clean and dropout > 0):
    backward(params, instance, trace, dlogits, out=out)
    clean = forward(params, instance, masked_positions)
    penalty, dpenalty = attention_penalty(clean.alpha, supervision.expected)
    loss = loss + supervision.gamma * penalty
    backward(
        params,
        instance,
        clean,
        np.zeros_like(dlogits),
        dalpha=supervision.gamma * dpenalty,
        out=out,
    )
  elif penalised:
    penalty, dpenalty = attention_penalty(trace.alpha, supervision.expected)
    loss = loss + supervision.gamma * penalty
    backward(
        params, instance, trace, dlogits, dalpha=supervision.gamma * dpenalty,
        out=out,
    )
  else:
    backward(params, instance, trace, dlogits, out=out)

  if not np.isfinite(loss):
    raise NumericalError(f"numerical failure on instance {instance.id}")
  return loss, out


def predict(
    params: ModelParams, instances: Sequence[EncodedInstance]
) -> np.ndarray:
  """Argmax labels with dropout off."""
  return np.array(
      [forward(params, inst).prediction for inst in instances], dtype=np.int64
  )
