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

"""JSON-lines persistence and content hashing."""

from collections.abc import Iterable
import hashlib
from pathlib import Path

from pydantic import BaseModel


def write_jsonl(path: Path, records: Iterable[BaseModel]) -> None:
  """Writes one compact JSON object per line, UTF-8, `\\n` line endings."""
  path.parent.mkdir(parents=True, exist_ok=True)
  with path.open("w", encoding="utf-8", newline="\n") as f:
    for record in records:
      f.write(record.model_dump_json())
      f.write("\n")


def read_jsonl[T: BaseModel](path: Path, model: type[T]) -> list[T]:
  """Reads a JSON-lines file into validated records.

  Args:
      path: file to read.
      model: pydantic model each line is validated against.

  Returns:
      list[T]: records in file order.
  """
  records = []
  with path.open("r", encoding="utf-8") as f:
    for line_no, line in enumerate(f, start=1):
      if not line.strip():
        continue
      try:
        records.append(model.model_validate_json(line))
      except ValueError as e:
        raise ValueError(f"{path}:{line_no}: {e}") from e
  return records


def file_sha256(path: Path) -> str:
  digest = hashlib.sha256()
  with path.open("rb") as f:
    for chunk in iter(lambda: f.read(1 << 20), b""):
      digest.update(chunk)
  return digest.hexdigest()


def text_sha256(lines: Iterable[str]) -> str:
  digest = hashlib.sha256()
  for line in lines:
    digest.update(line.encode("utf-8"))
    digest.update(b"\n")
  return digest.hexdigest()
