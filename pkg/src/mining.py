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

"""Progressive mining of attention supervision.

Each iteration masks every instance's extracted words, asks the current
model which remaining context word is most influential, and, when the
saliency distribution is peaked enough, records that word as active (the
prediction was right) or misleading (it was wrong). The model then keeps
training on the masked corpus before the next iteration.
"""

from collections.abc import Sequence
from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Literal

import numpy as np
from tqdm import tqdm

from .dataset import EncodedInstance, SupervisionState, apply_mask
from .helpers import make_rng, write_jsonl
from .memory_network import ModelParams, eligible_positions, forward
from .models.config_types import MiningConfig, TrainConfig
from .models.corpus_types import IterationSummary, MiningLogEntry
from .numerics import entropy
from .saliency import compute_saliency
from .training import DivergenceError, MinedCorpus, train

logger = logging.getLogger(__name__)

StepStatus = Literal["extracted", "gated", "exhausted"]


class MiningError(ValueError):
  """Raised when a mining step fails; names the iteration and instance."""


@dataclass
class MiningStep:
  """Outcome of one (iteration, instance) step.

  `masked` is the instance with the words extracted before this step
  masked; it is the one that joins the iteration's training corpus.
  """

  status: StepStatus
  masked: EncodedInstance
  masked_positions: list[int] = field(default_factory=list)
  entropy: float | None = None
  predicted: int | None = None
  position: int | None = None
  destination: Literal["s_a", "s_m"] | None = None
  saliency: np.ndarray | None = None

  def log_entry(self, k: int, instance: EncodedInstance) -> MiningLogEntry:
    return MiningLogEntry(
        k=k,
        id=instance.id,
        entropy=self.entropy,
        y=instance.label,
        y_p=self.predicted,
        status=self.status,
        position=self.position,
        word=instance.words[self.position]
        if self.position is not None
        else None,
        destination=self.destination,
        masked=self.masked_positions,
        saliency=[] if self.saliency is None else self.saliency.tolist(),
    )


def mine_instance_step(
    params: ModelParams,
    instance: EncodedInstance,
    state: SupervisionState,
    config: MiningConfig,
    rng: np.random.Generator,
) -> MiningStep:
  """Runs the gate-and-extract step for one instance against `params`.

  The state is updated in place when a word is extracted. Saliency ties go
  to the lowest position; the random-mask ablation draws the position
  uniformly from the eligible ones instead.

  Args:
      params: the current parameter snapshot.
      instance: the original, unmasked instance.
      state: supervision sets, written on extraction.
      config: gate threshold, saliency mode and ablation switch.
      rng: per-step stream for saliency noise and random picks.

  Returns:
      MiningStep: the decision and the masked instance.
  """
  extracted = state.extracted(instance.id)
  masked = apply_mask(instance, extracted)
  eligible = eligible_positions(masked)
  if eligible.size < 2:
    predicted = forward(params, masked).prediction if eligible.size else None
    return MiningStep(
        "exhausted", masked, extracted, predicted=predicted
    )

  trace = forward(params, masked)
  saliency = compute_saliency(
      config.saliency,
      params,
      masked,
      n=config.noise_samples,
      sigma=config.noise_sigma,
      rng=rng,
      trace=trace,
  )
  e = entropy(saliency.scores)
  step = MiningStep(
      "gated",
      masked,
      extracted,
      entropy=e,
      predicted=trace.prediction,
      saliency=saliency.scores,
  )
  if not e < config.epsilon:
    return step

  if config.random_mask:
    position = int(rng.choice(eligible))
  else:
    position = saliency.argmax()
  step.status = "extracted"
  step.position = position
  if trace.prediction == instance.label:
    state.add_active(instance.id, position)
    step.destination = "s_a"
  else:
    state.add_misleading(instance.id, position)
    step.destination = "s_m"
  return step


@dataclass
class MiningResult:
  corpus: MinedCorpus
  params_history: list[ModelParams] = field(default_factory=list)
  log: list[MiningLogEntry] = field(default_factory=list)
  summary: list[IterationSummary] = field(default_factory=list)

  def write(self, out_dir: Path) -> None:
    """Writes the mined corpus, mining log and per-iteration summary."""
    out_dir = Path(out_dir)
    self.corpus.save(out_dir / "supervision.jsonl")
    write_jsonl(out_dir / "mining_log.jsonl", self.log)
    (out_dir / "mining_summary.json").write_text(
        json.dumps([s.model_dump() for s in self.summary], indent=2) + "\n",
        encoding="utf-8",
    )


def run_mining(
    corpus: Sequence[EncodedInstance],
    params: ModelParams,
    config: MiningConfig,
    train_config: TrainConfig,
) -> MiningResult:
  """Mines supervision for K iterations starting from trained `params`.

  Instances are visited in corpus order against the previous iteration's
  parameters. After each iteration the model trains for
  `continue_epochs` epochs on the masked corpus.

  Args:
      corpus: original instances D.
      params: θ^(0), already trained on D.
      config: mining settings.
      train_config: optimizer settings for the continued training.

  Returns:
      MiningResult: D_s, θ^(0..K), the mining log and per-iteration counts.

  Raises:
      MiningError: a step or a continued training failed.
  """
  state = SupervisionState(corpus)
  result = MiningResult(
      corpus=MinedCorpus(corpus, state), params_history=[params]
  )
  continue_config = train_config.model_copy(
      update={"epochs": config.continue_epochs}
  )

  for k in range(1, config.k + 1):
    summary = IterationSummary(k=k)
    masked_corpus = []
    instances = tqdm(
        enumerate(corpus),
        total=len(corpus),
        desc=f"mining {k}/{config.k}",
        disable=not train_config.progress,
        leave=False,
    )
    for idx, inst in instances:
      try:
        step = mine_instance_step(
            params, inst, state, config, make_rng(config.seed, "mining", k, idx)
        )
      except ValueError as e:
        raise MiningError(f"iteration {k}, instance {inst.id}: {e}") from e
      masked_corpus.append(step.masked)
      entry = step.log_entry(k, inst)
      result.log.append(entry)
      logger.debug(
          f"k={k} id={inst.id} E={step.entropy} y={inst.label}"
          f" y_p={step.predicted} {step.status} {entry.word or '---'}"
          f" {step.destination or ''}"
      )
      if step.status == "exhausted":
        summary.exhausted += 1
      elif step.status == "gated":
        summary.gated += 1
      else:
        summary.gate_open += 1
        if step.destination == "s_a":
          summary.to_s_a += 1
        else:
          summary.to_s_m += 1
    result.summary.append(summary)
    logger.info(
        f"Mining iteration {k}: {summary.gate_open} extracted"
        f" ({summary.to_s_a} s_a, {summary.to_s_m} s_m), {summary.gated}"
        f" gated, {summary.exhausted} exhausted"
    )

    try:
      params = train(
          params, masked_corpus, continue_config, stream=f"mining-{k}"
      ).params
    except DivergenceError as e:
      raise MiningError(f"iteration {k}: continued training failed: {e}") from e
    result.params_history.append(params)

  result.corpus = MinedCorpus(corpus, state)
  return result


def mine_random_ablation(
    corpus: Sequence[EncodedInstance],
    params: ModelParams,
    config: MiningConfig,
    train_config: TrainConfig,
) -> MiningResult:
  """Same loop as `run_mining`, but extracted positions are drawn at random."""
  return run_mining(
      corpus,
      params,
      config.model_copy(update={"random_mask": True}),
      train_config,
  )
