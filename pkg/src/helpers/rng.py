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

"""Seeded random streams."""

import zlib

import numpy as np


def _key_part(part: int | str) -> int:
  if isinstance(part, str):
    return zlib.crc32(part.encode("utf-8"))
  if part < 0:
    raise ValueError(f"Stream key parts must be non-negative, got {part}")
  return part


def make_rng(seed: int, *keys: int | str) -> np.random.Generator:
  """Returns an independent PCG64 stream for (seed, *keys).

  The same seed and keys always give the same stream, on every platform, so
  a component can derive its own sub-stream (for example per mining
  iteration and instance) without consuming draws from a shared generator.

  Args:
      seed: run seed.
      *keys: purpose labels or indices distinguishing sub-streams.

  Returns:
      np.random.Generator: a fresh generator positioned at the stream start.
  """
  sequence = np.random.SeedSequence(
      entropy=seed, spawn_key=tuple(_key_part(k) for k in keys)
  )
  return np.random.Generator(np.random.PCG64(sequence))
