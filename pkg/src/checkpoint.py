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

"""Binary checkpoints of ModelParams.

Layout (all integers little-endian unsigned 32-bit):

  magic "MNCK" | version | d | |V| | 32-byte SHA-256 of the vocabulary
  followed by every tensor in declaration order as little-endian float32.
"""

import logging
from pathlib import Path
import struct

import numpy as np

from . import constants
from .dataset import Vocabulary
from .memory_network import PARAM_NAMES, ModelParams

logger = logging.getLogger(__name__)

_HEADER = struct.Struct("<4sIII32s")


class CheckpointError(ValueError):
  """Raised for unreadable checkpoints or vocabulary mismatches."""


def _shapes(dim: int, vocab_size: int) -> dict[str, tuple[int, ...]]:
  return {
      "aspect_embedding": (vocab_size, dim),
      "memory_embedding": (vocab_size, dim),
      "context_embedding": (vocab_size, dim),
      "attention": (dim, dim),
      "output_weight": (constants.NUM_CLASSES, dim),
      "output_bias": (constants.NUM_CLASSES,),
  }


def save_checkpoint(path: Path, params: ModelParams, vocab: Vocabulary) -> None:
  if params.vocab_size != len(vocab):
    raise CheckpointError(
        f"params cover {params.vocab_size} words, vocabulary has {len(vocab)}"
    )
  path = Path(path)
  path.parent.mkdir(parents=True, exist_ok=True)
  header = _HEADER.pack(
      constants.CHECKPOINT_MAGIC,
      constants.CHECKPOINT_VERSION,
      params.dim,
      params.vocab_size,
      bytes.fromhex(vocab.sha256()),
  )
  with path.open("wb") as f:
    f.write(header)
    for name in PARAM_NAMES:
      f.write(getattr(params, name).astype("<f4").tobytes())
  logger.info(f"Saved checkpoint {path}")


def load_checkpoint(
    path: Path, vocab: Vocabulary, dtype=np.float64
) -> ModelParams:
  """Reads a checkpoint written against `vocab`.

  Raises:
      CheckpointError: bad magic or version, truncated data, or a vocabulary
        hash different from `vocab`'s.
  """
  path = Path(path)
  data = path.read_bytes()
  if len(data) < _HEADER.size:
    raise CheckpointError(f"{path}: truncated header")
  magic, version, dim, vocab_size, digest = _HEADER.unpack_from(data)
  if magic != constants.CHECKPOINT_MAGIC:
    raise CheckpointError(f"{path}: not a checkpoint (magic {magic!r})")
  if version != constants.CHECKPOINT_VERSION:
    raise CheckpointError(f"{path}: unsupported format version {version}")
  if digest.hex() != vocab.sha256() or vocab_size != len(vocab):
    raise CheckpointError(
        f"{path}: vocabulary hash mismatch (checkpoint {digest.hex()[:12]},"
        f" vocabulary {vocab.sha256()[:12]})"
    )

  tensors = {}
  offset = _HEADER.size
  for name, shape in _shapes(dim, vocab_size).items():
    count = int(np.prod(shape))
    end = offset + 4 * count
    if end > len(data):
      raise CheckpointError(f"{path}: truncated tensor {name}")
    tensors[name] = (
        np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        .reshape(shape)
        .astype(dtype)
    )
    offset = end
  if offset != len(data):
    raise CheckpointError(f"{path}: {len(data) - offset} trailing bytes")
  return ModelParams.from_dict(tensors)
