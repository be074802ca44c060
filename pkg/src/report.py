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

"""Attention heatmap reports of mining runs, as plain text and static HTML."""

from collections import defaultdict
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
import html

from . import constants
from .dataset import EncodedInstance
from .memory_network import ModelParams, forward
from .models.corpus_types import MiningLogEntry


class ReportError(ValueError):
  """Raised when report inputs do not belong together."""


@dataclass
class ReportRow:
  """One rendered sentence: tokens with weights plus the decision columns."""

  label: str
  tokens: list[str]
  weights: list[float]
  aspect: frozenset[int]
  y: str
  y_p: str
  entropy: float | None = None
  extracted: str | None = None


@dataclass
class InstanceReport:
  id: str
  rows: list[ReportRow] = field(default_factory=list)


def _label(code: int | None) -> str:
  if code is None:
    return "-"
  return constants.LABEL_NAMES[int(code)][:3].capitalize()


def check_corpus_hash(expected: str, actual: str) -> None:
  if expected != actual:
    raise ReportError(
        f"corpus hash mismatch: artifacts were built from {expected[:12]},"
        f" corpus is {actual[:12]}"
    )


def _mining_rows(
    instance: EncodedInstance, entries: Sequence[MiningLogEntry]
) -> list[ReportRow]:
  rows = []
  for entry in sorted(entries, key=lambda e: e.k):
    masked = set(entry.masked)
    tokens = [
        constants.MASK_TOKEN if i in masked else w
        for i, w in enumerate(instance.words)
    ]
    weights = list(entry.saliency) or [0.0] * len(tokens)
    rows.append(
        ReportRow(
            label=f"iter {entry.k}",
            tokens=tokens,
            weights=[0.0 if i in masked else w for i, w in enumerate(weights)],
            aspect=frozenset(instance.aspect_positions),
            y=_label(entry.y),
            y_p=_label(entry.y_p),
            entropy=entry.entropy,
            extracted=entry.word,
        )
    )
    # Rows stop at the first iteration without an extraction.
    if entry.status != "extracted":
      break
  return rows


def build_report(
    instances: Sequence[EncodedInstance],
    log: Iterable[MiningLogEntry],
    params: ModelParams | None = None,
    ids: Iterable[str] | None = None,
) -> list[InstanceReport]:
  """Collects report rows for the selected instances.

  Each instance gets one row per mining iteration up to and including the
  first iteration without an extraction, followed by a row with the
  attention of `params` on the original sentence when params are given.

  Args:
      instances: the corpus the log refers to.
      log: mining log entries.
      params: checkpoint whose attention is rendered on the original input.
      ids: instance ids to include; defaults to every instance in the log.

  Returns:
      list[InstanceReport]: in corpus order.
  """
  by_id: dict[str, list[MiningLogEntry]] = defaultdict(list)
  for entry in log:
    by_id[entry.id].append(entry)
  known = {inst.id for inst in instances}
  unknown = set(by_id) - known
  if unknown:
    raise ReportError(
        f"mining log references {len(unknown)} instances missing from the"
        f" corpus, e.g. {sorted(unknown)[0]}"
    )
  wanted = set(ids) if ids is not None else set(by_id)
  missing = wanted - known
  if missing:
    raise ReportError(f"unknown instance ids: {sorted(missing)}")

  reports = []
  for inst in instances:
    if inst.id not in wanted:
      continue
    report = InstanceReport(id=inst.id, rows=_mining_rows(inst, by_id[inst.id]))
    if params is not None:
      trace = forward(params, inst)
      report.rows.append(
          ReportRow(
              label="model",
              tokens=list(inst.words),
              weights=[float(a) for a in trace.alpha],
              aspect=frozenset(inst.aspect_positions),
              y=_label(inst.label),
              y_p=_label(trace.prediction),
          )
      )
    reports.append(report)
  return reports


def render_text(reports: Sequence[InstanceReport]) -> str:
  """One block per instance; tokens as word(weight), aspects in brackets."""
  out = []
  for report in reports:
    out.append(f"== {report.id}")
    for row in report.rows:
      words = " ".join(
          f"[{t}]" if i in row.aspect else f"{t}({w:.2f})"
          for i, (t, w) in enumerate(zip(row.tokens, row.weights, strict=True))
      )
      e = "-" if row.entropy is None else f"{row.entropy:.2f}"
      x = row.extracted or "---"
      out.append(f"{row.label:>8} | {words} | {row.y}/{row.y_p} | E={e} | {x}")
    out.append("")
  return "\n".join(out)


_STYLE = """
body { font-family: sans-serif; margin: 1.5em; }
table { border-collapse: collapse; margin-bottom: 1.5em; }
td, th { border: 1px solid #ccc; padding: 4px 8px; vertical-align: top; }
.tok { padding: 1px 2px; margin: 0 1px; border-radius: 2px; }
.aspect { font-weight: bold; }
"""


def _token_html(row: ReportRow, i: int) -> str:
  text = html.escape(row.tokens[i])
  if i in row.aspect:
    return f'<span class="tok aspect">[{text}]</span>'
  shade = max(0.0, min(1.0, row.weights[i]))
  return (
      f'<span class="tok" style="background: rgba(220, 40, 40, {shade:.3f})"'
      f' title="{row.weights[i]:.4f}">{text}</span>'
  )


def render_html(
    reports: Sequence[InstanceReport], title: str = "Attention"
) -> str:
  """A single self-contained HTML page; no scripts or external resources."""
  parts = [
      "<!DOCTYPE html>",
      '<html><head><meta charset="utf-8">',
      f"<title>{html.escape(title)}</title>",
      f"<style>{_STYLE}</style></head><body>",
      f"<h1>{html.escape(title)}</h1>",
  ]
  for report in reports:
    parts.append(f"<h2>{html.escape(report.id)}</h2>")
    parts.append(
        "<table><tr><th>row</th><th>sentence</th><th>y / y_p</th>"
        "<th>E</th><th>extracted</th></tr>"
    )
    for row in report.rows:
      sentence = " ".join(_token_html(row, i) for i in range(len(row.tokens)))
      e = "" if row.entropy is None else f"{row.entropy:.2f}"
      x = html.escape(row.extracted) if row.extracted else "---"
      parts.append(
          f"<tr><td>{html.escape(row.label)}</td><td>{sentence}</td>"
          f"<td>{row.y} / {row.y_p}</td><td>{e}</td><td>{x}</td></tr>"
      )
    parts.append("</table>")
  parts.append("</body></html>")
  return "\n".join(parts) + "\n"
