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

"""Corpus loading, vocabulary, embeddings, splits and supervision state."""

from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from functools import singledispatch
import logging
import math
from pathlib import Path

from lxml import etree
from nltk.tokenize import WordPunctTokenizer
import numpy as np

from . import constants
from .helpers import read_jsonl, text_sha256, write_jsonl
from .models.corpus_types import Instance, Sentiment, SupervisionRecord

logger = logging.getLogger(__name__)

_tokenizer = WordPunctTokenizer()


class DatasetError(ValueError):
  """Raised for malformed corpus, vocabulary or embedding files."""


def tokenize(text: str) -> list[str]:
  """Lowercases and splits on whitespace and punctuation boundaries."""
  return _tokenizer.tokenize(text.lower())


# Loaders


def _tokenize_around(
    text: str, start: int, end: int
) -> tuple[list[str], list[int]]:
  """Tokenizes `text` so that [start, end) covers whole tokens.

  Segments before, inside and after the span are tokenized separately, which
  splits any token straddling a span boundary.

  Returns:
      tuple[list[str], list[int]]: tokens and the positions of the span's
      tokens.
  """
  left = tokenize(text[:start])
  middle = tokenize(text[start:end])
  right = tokenize(text[end:])
  positions = list(range(len(left), len(left) + len(middle)))
  return left + middle + right, positions


def load_semeval_xml(path: Path) -> list[Instance]:
  """Loads SemEval-2014 Task 4 aspect-term XML.

  One instance per (sentence, aspect term); `conflict` polarities are
  dropped. Character offsets become token positions.

  Args:
      path: XML file with sentence/text/aspectTerms/aspectTerm elements.

  Returns:
      list[Instance]: instances in document order.
  """
  path = Path(path)
  try:
    tree = etree.parse(str(path))
  except etree.XMLSyntaxError as e:
    raise DatasetError(
        f"{path}: malformed XML at line {e.lineno}: {e.msg}"
    ) from e
  except OSError as e:
    raise DatasetError(f"{path}: cannot read file: {e}") from e

  instances: list[Instance] = []
  seen_ids: set[str] = set()
  for sentence in tree.getroot().iter("sentence"):
    sentence_id = sentence.get("id", "")
    text = sentence.findtext("text") or ""
    terms = sentence.find("aspectTerms")
    if terms is None:
      continue
    for term in terms.findall("aspectTerm"):
      polarity = term.get("polarity", "")
      if polarity == "conflict":
        continue
      if polarity not in constants.SEMEVAL_POLARITY:
        raise DatasetError(
            f"{path}: sentence {sentence_id}: unknown polarity {polarity!r}"
        )
      start, end = int(term.get("from", "-1")), int(term.get("to", "-1"))
      if not 0 <= start < end <= len(text):
        raise DatasetError(
            f"{path}: sentence {sentence_id}: offsets {start}-{end} outside"
            " the sentence text"
        )
      surface = term.get("term", "")
      if text[start:end].lower() != surface.lower():
        logger.warning(
            f"{path}: sentence {sentence_id}: term {surface!r} differs from"
            f" offset text {text[start:end]!r}"
        )
      tokens, positions = _tokenize_around(text, start, end)
      if not positions:
        raise DatasetError(
            f"{path}: sentence {sentence_id}: aspect span {start}-{end}"
            " covers no token"
        )
      instance_id = f"{sentence_id}:{start}-{end}"
      while instance_id in seen_ids:
        instance_id += "'"
      seen_ids.add(instance_id)
      instances.append(
          Instance(
              id=instance_id,
              tokens=tuple(tokens),
              aspect_positions=tuple(positions),
              label=Sentiment(constants.SEMEVAL_POLARITY[polarity]),
          )
      )
  return instances


def load_twitter_3line(path: Path) -> list[Instance]:
  """Loads the 3-line twitter format (sentence with `$T$`, target, label).

  Args:
      path: text file of repeating 3-line records; labels 1/-1/0.

  Returns:
      list[Instance]: instances in file order.
  """
  path = Path(path)
  try:
    lines = path.read_text(encoding="utf-8").splitlines()
  except OSError as e:
    raise DatasetError(f"{path}: cannot read file: {e}") from e
  while lines and not lines[-1].strip():
    lines.pop()
  if len(lines) % 3:
    raise DatasetError(
        f"{path}: {len(lines)} lines is not a whole number of 3-line records"
    )

  instances = []
  for record in range(len(lines) // 3):
    line_no = 3 * record + 1
    chunk = lines[3 * record : 3 * record + 3]
    sentence, target, label = (s.strip() for s in chunk)
    if label not in constants.TWITTER_POLARITY:
      raise DatasetError(f"{path}:{line_no + 2}: unknown label {label!r}")
    if constants.TWITTER_PLACEHOLDER not in sentence:
      raise DatasetError(
          f"{path}:{line_no}: sentence lacks the"
          f" {constants.TWITTER_PLACEHOLDER} placeholder"
      )
    left, right = sentence.split(constants.TWITTER_PLACEHOLDER, 1)
    left_tokens = tokenize(left)
    target_tokens = tokenize(target)
    if not target_tokens:
      raise DatasetError(f"{path}:{line_no + 1}: empty target")
    tokens = left_tokens + target_tokens + tokenize(right)
    positions = range(len(left_tokens), len(left_tokens) + len(target_tokens))
    instances.append(
        Instance(
            id=f"{path.stem}-{record}",
            tokens=tuple(tokens),
            aspect_positions=tuple(positions),
            label=Sentiment(constants.TWITTER_POLARITY[label]),
        )
    )
  return instances


def class_counts(instances: Iterable[Instance]) -> dict[Sentiment, int]:
  counts = Counter(inst.label for inst in instances)
  return {s: counts.get(s, 0) for s in Sentiment}


def format_counts(instances: Iterable[Instance]) -> str:
  counts = class_counts(instances)
  return (
      f"Pos {counts[Sentiment.POSITIVE]} Neg {counts[Sentiment.NEGATIVE]}"
      f" Neu {counts[Sentiment.NEUTRAL]}"
  )


def save_corpus(path: Path, instances: Iterable[Instance]) -> None:
  write_jsonl(Path(path), instances)


def load_corpus(path: Path) -> list[Instance]:
  try:
    return read_jsonl(Path(path), Instance)
  except OSError as e:
    raise DatasetError(f"{path}: cannot read corpus: {e}") from e


# Vocabulary


class Vocabulary:
  """Word to id bijection with reserved `<mask>` (0) and `<unk>` (1) ids."""

  def __init__(self, words: Sequence[str]):
    words = list(words)
    if words[: 2] != [constants.MASK_TOKEN, constants.UNK_TOKEN]:
      raise DatasetError("vocabulary must start with <mask>, <unk>")
    if len(set(words)) != len(words):
      raise DatasetError("vocabulary contains duplicate words")
    self._words = words
    self._index = {w: i for i, w in enumerate(words)}

  def __len__(self) -> int:
    return len(self._words)

  def __contains__(self, word: str) -> bool:
    return word in self._index

  @property
  def words(self) -> list[str]:
    return list(self._words)

  def id_of(self, word: str) -> int:
    return self._index.get(word, constants.UNK_ID)

  def word_of(self, idx: int) -> str:
    return self._words[idx]

  def encode(self, tokens: Iterable[str]) -> np.ndarray:
    return np.array([self.id_of(t) for t in tokens], dtype=np.int64)

  def decode(self, ids: Iterable[int]) -> list[str]:
    return [self._words[int(i)] for i in ids]

  def sha256(self) -> str:
    return text_sha256(self._words)

  def save(self, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(self._words) + "\n", encoding="utf-8")

  @classmethod
  def load(cls, path: Path) -> "Vocabulary":
    lines = Path(path).read_text(encoding="utf-8").split("\n")
    if lines and lines[-1] == "":
      lines.pop()
    return cls(lines)


def build_vocab(
    instances: Iterable[Instance], min_count: int = 1
) -> Vocabulary:
  """Builds a vocabulary ordered by frequency (desc), then lexicographically.

  Args:
      instances: corpus to count tokens over.
      min_count: minimum frequency for a word to get its own id.

  Returns:
      Vocabulary: `<mask>`, `<unk>`, then the kept words.
  """
  if min_count < 1:
    raise DatasetError(f"min_count must be >= 1, got {min_count}")
  counts: Counter[str] = Counter()
  for inst in instances:
    counts.update(inst.tokens)
  if not counts:
    raise DatasetError("cannot build a vocabulary from an empty corpus")
  reserved = {constants.MASK_TOKEN, constants.UNK_TOKEN}
  kept = sorted(
      (w for w, c in counts.items() if c >= min_count and w not in reserved),
      key=lambda w: (-counts[w], w),
  )
  return Vocabulary([constants.MASK_TOKEN, constants.UNK_TOKEN, *kept])


def _is_number(field: str) -> bool:
  try:
    float(field)
  except ValueError:
    return False
  return True


def load_embeddings(
    path: Path | None,
    vocab: Vocabulary,
    dim: int = constants.DEFAULT_DIM,
    rng: np.random.Generator | None = None,
    dtype: type[np.floating] = np.float64,
) -> np.ndarray:
  """Builds a |V| x dim matrix from a whitespace-delimited vector file.

  Every row starts as Uniform[-0.25, 0.25]; rows of words found in the file
  are then overwritten (first occurrence wins). A first line of exactly two
  integers is treated as a word2vec-style header and skipped. Since the last
  `dim` fields are the vector, words containing spaces are accepted, but a
  line whose extra leading fields are all numbers has too many values and
  is rejected.

  Args:
      path: vector file, or None for an all-random matrix.
      vocab: vocabulary fixing the row order.
      dim: vector width.
      rng: generator for out-of-vocabulary rows.
      dtype: floating type of the result.

  Returns:
      np.ndarray: the embedding matrix.
  """
  rng = rng if rng is not None else np.random.default_rng(0)
  r = constants.EMBEDDING_OOV_RANGE
  matrix = rng.uniform(-r, r, size=(len(vocab), dim)).astype(dtype)
  if path is None:
    return matrix

  path = Path(path)
  filled = set()
  with path.open("r", encoding="utf-8", errors="replace") as f:
    for line_no, line in enumerate(f, start=1):
      fields = line.rstrip("\n").split()
      if not fields:
        continue
      if line_no == 1 and len(fields) == 2 and all(x.isdigit() for x in fields):
        logger.warning(f"{path}: skipping header line {line.strip()!r}")
        continue
      if len(fields) < dim + 1:
        raise DatasetError(
            f"{path}:{line_no}: expected a word and {dim} values, got"
            f" {len(fields)} fields"
        )
      if len(fields) > dim + 1 and all(
          _is_number(x) for x in fields[1:-dim]
      ):
        raise DatasetError(
            f"{path}:{line_no}: expected a word and {dim} values, got"
            f" {len(fields) - 1} values"
        )
      word = " ".join(fields[:-dim])
      if word not in vocab:
        continue
      idx = vocab.id_of(word)
      if idx in filled:
        continue
      try:
        matrix[idx] = np.asarray(fields[-dim:], dtype=np.float64)
      except ValueError as e:
        raise DatasetError(f"{path}:{line_no}: {e}") from e
      filled.add(idx)
  logger.info(
      f"Embeddings: {len(filled)}/{len(vocab)} words found in {path.name}"
  )
  return matrix


def split_heldout(
    instances: Sequence[Instance],
    fraction: float = constants.DEFAULT_VALIDATION_FRACTION,
    rng: np.random.Generator | None = None,
) -> tuple[list[Instance], list[Instance]]:
  """Randomly holds out round(N * fraction) instances for validation.

  Both parts keep the input order.

  Returns:
      tuple[list[Instance], list[Instance]]: (train, validation).
  """
  if not 0 < fraction < 1:
    raise DatasetError(f"fraction must be in (0, 1), got {fraction}")
  n = len(instances)
  if n < 5:
    raise DatasetError(f"need at least 5 instances to split, got {n}")
  rng = rng if rng is not None else np.random.default_rng(0)
  n_val = int(math.floor(n * fraction + 0.5))
  held = set(rng.permutation(n)[:n_val].tolist())
  train = [inst for i, inst in enumerate(instances) if i not in held]
  validation = [inst for i, inst in enumerate(instances) if i in held]
  return train, validation


# Encoded instances and masking


@dataclass(frozen=True)
class EncodedInstance:
  """An instance with token ids against a fixed vocabulary."""

  id: str
  token_ids: np.ndarray
  aspect_positions: tuple[int, ...]
  label: int
  words: tuple[str, ...]

  def __len__(self) -> int:
    return int(self.token_ids.shape[0])


def encode_instance(instance: Instance, vocab: Vocabulary) -> EncodedInstance:
  ids = vocab.encode(instance.tokens)
  ids.setflags(write=False)
  return EncodedInstance(
      id=instance.id,
      token_ids=ids,
      aspect_positions=instance.aspect_positions,
      label=int(instance.label),
      words=instance.tokens,
  )


def encode_corpus(
    instances: Iterable[Instance], vocab: Vocabulary
) -> list[EncodedInstance]:
  return [encode_instance(inst, vocab) for inst in instances]


def _check_mask_positions(
    instance_id: str,
    length: int,
    aspect: Sequence[int],
    positions: Iterable[int],
) -> list[int]:
  positions = sorted(set(positions))
  for pos in positions:
    if not 0 <= pos < length:
      raise DatasetError(
          f"Instance {instance_id}: mask position {pos} out of range"
      )
    if pos in aspect:
      raise DatasetError(
          f"Instance {instance_id}: cannot mask aspect position {pos}"
      )
  return positions


@singledispatch
def apply_mask(instance, positions: Iterable[int]):
  """Returns a copy of `instance` with `<mask>` at the given positions.

  Aspect positions cannot be masked. The input is not modified.
  """
  raise TypeError(f"cannot mask {type(instance).__name__}")


@apply_mask.register
def _(instance: Instance, positions: Iterable[int]) -> Instance:
  positions = _check_mask_positions(
      instance.id, len(instance.tokens), instance.aspect_positions, positions
  )
  if not positions:
    return instance
  tokens = list(instance.tokens)
  for pos in positions:
    tokens[pos] = constants.MASK_TOKEN
  return instance.model_copy(update={"tokens": tuple(tokens)})


@apply_mask.register
def _(instance: EncodedInstance, positions: Iterable[int]) -> EncodedInstance:
  positions = _check_mask_positions(
      instance.id, len(instance), instance.aspect_positions, positions
  )
  if not positions:
    return instance
  ids = instance.token_ids.copy()
  ids[positions] = constants.MASK_ID
  ids.setflags(write=False)
  words = list(instance.words)
  for pos in positions:
    words[pos] = constants.MASK_TOKEN
  return EncodedInstance(
      id=instance.id,
      token_ids=ids,
      aspect_positions=instance.aspect_positions,
      label=instance.label,
      words=tuple(words),
  )


# Supervision state


class SupervisionState:
  """Per-instance extracted positions (s_a, s_m), keyed by instance id.

  Positions are kept in extraction order. A state has a single writer during
  a mining iteration.
  """

  def __init__(self, instances: Iterable[EncodedInstance | Instance]):
    self._aspect: dict[str, frozenset[int]] = {}
    self._length: dict[str, int] = {}
    self._active: dict[str, list[int]] = {}
    self._misleading: dict[str, list[int]] = {}
    for inst in instances:
      self._aspect[inst.id] = frozenset(inst.aspect_positions)
      self._length[inst.id] = len(inst) if isinstance(
          inst, EncodedInstance
      ) else len(inst.tokens)
      self._active[inst.id] = []
      self._misleading[inst.id] = []

  def __contains__(self, instance_id: str) -> bool:
    return instance_id in self._active

  def active(self, instance_id: str) -> list[int]:
    return list(self._active[instance_id])

  def misleading(self, instance_id: str) -> list[int]:
    return list(self._misleading[instance_id])

  def extracted(self, instance_id: str) -> list[int]:
    """s_a ∪ s_m, sorted."""
    return sorted(self._active[instance_id] + self._misleading[instance_id])

  def _check(self, instance_id: str, position: int) -> None:
    if instance_id not in self._active:
      raise DatasetError(f"Unknown instance {instance_id}")
    if not 0 <= position < self._length[instance_id]:
      raise DatasetError(
          f"Instance {instance_id}: position {position} out of range"
      )
    if position in self._aspect[instance_id]:
      raise DatasetError(
          f"Instance {instance_id}: position {position} is an aspect position"
      )
    if position in self._active[instance_id] or (
        position in self._misleading[instance_id]
    ):
      raise DatasetError(
          f"Instance {instance_id}: position {position} already extracted"
      )

  def add_active(self, instance_id: str, position: int) -> None:
    self._check(instance_id, position)
    self._active[instance_id].append(position)

  def add_misleading(self, instance_id: str, position: int) -> None:
    self._check(instance_id, position)
    self._misleading[instance_id].append(position)

  def to_records(self) -> list[SupervisionRecord]:
    return [
        SupervisionRecord(id=i, s_a=self.active(i), s_m=self.misleading(i))
        for i in self._active
    ]

  @classmethod
  def from_records(
      cls,
      instances: Iterable[EncodedInstance | Instance],
      records: Iterable[SupervisionRecord],
  ) -> "SupervisionState":
    state = cls(instances)
    for record in records:
      for pos in record.s_a:
        state.add_active(record.id, pos)
      for pos in record.s_m:
        state.add_misleading(record.id, pos)
    return state

  def save(self, path: Path) -> None:
    write_jsonl(Path(path), self.to_records())

  @classmethod
  def load(
      cls, path: Path, instances: Iterable[EncodedInstance | Instance]
  ) -> "SupervisionState":
    records = read_jsonl(Path(path), SupervisionRecord)
    return cls.from_records(instances, records)
