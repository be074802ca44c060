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

"""Configuration objects for training, mining and full runs."""

from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from .. import constants

RunMode = Literal[
    "baseline", "aw-as", "pg-as", "random-mask", "as_a-only", "as_m-only"
]
SaliencyMode = Literal["aw", "pg"]
Precision = Literal["float64", "float32"]


class StrictConfig(BaseModel):
  """Base class for configs; unknown keys are rejected."""

  model_config = ConfigDict(extra="forbid", frozen=True)


class TrainConfig(StrictConfig):
  """Optimizer loop settings shared by plain and supervised training."""

  lr: float = Field(default=constants.DEFAULT_LR, gt=0)
  epochs: int = Field(default=constants.DEFAULT_EPOCHS, ge=1)
  batch_size: int = Field(default=constants.DEFAULT_BATCH, ge=1)
  dropout: float = Field(default=constants.DEFAULT_DROPOUT, ge=0, lt=1)
  gamma: float = Field(default=constants.DEFAULT_GAMMA, ge=0)
  patience: int = Field(default=constants.DEFAULT_PATIENCE, ge=1)
  seed: int = 0
  regularize_with_dropout: bool = True
  dtype: Precision = "float64"
  progress: bool = False


class MiningConfig(StrictConfig):
  """Settings of the supervision mining loop."""

  k: int = Field(default=constants.DEFAULT_K, ge=1)
  # 0 closes the gate entirely; the CLI keeps it strictly positive.
  epsilon: float = Field(default=constants.MODE_EPSILON["pg"], ge=0)
  saliency: SaliencyMode = "pg"
  noise_samples: int = Field(default=constants.DEFAULT_NOISE_SAMPLES, ge=1)
  noise_sigma: float = Field(default=constants.DEFAULT_NOISE_SIGMA, ge=0)
  continue_epochs: int = Field(default=1, ge=1)
  random_mask: bool = False
  seed: int = 0


class RunConfig(StrictConfig):
  """Everything `run` needs; echoed as key=value to the output directory."""

  dataset: Path
  out: Path
  mode: RunMode = "pg-as"
  saliency: SaliencyMode = "pg"
  embeddings: Path | None = None
  k: int = Field(default=constants.DEFAULT_K, ge=1)
  epsilon: float | None = Field(default=None, gt=0)
  gamma: float | None = Field(default=None, ge=0)
  noise_n: int = Field(default=constants.DEFAULT_NOISE_SAMPLES, ge=1)
  noise_sigma: float = Field(default=constants.DEFAULT_NOISE_SIGMA, ge=0)
  lr: float = Field(default=constants.DEFAULT_LR, gt=0)
  dropout: float = Field(default=constants.DEFAULT_DROPOUT, ge=0, lt=1)
  epochs: int = Field(default=constants.DEFAULT_EPOCHS, ge=1)
  batch: int = Field(default=constants.DEFAULT_BATCH, ge=1)
  patience: int = Field(default=constants.DEFAULT_PATIENCE, ge=1)
  seed: int = 0
  dim: int = Field(default=constants.DEFAULT_DIM, ge=1)
  dtype: Precision = "float64"
  init_range: float = Field(default=constants.PARAM_INIT_RANGE, gt=0)
  warm_start: bool = False
  continue_epochs: int = Field(default=1, ge=1)
  regularize_with_dropout: bool = True
  bootstrap_samples: int = Field(
      default=constants.DEFAULT_BOOTSTRAP_SAMPLES, ge=1
  )

  @property
  def effective_saliency(self) -> SaliencyMode:
    if self.mode == "aw-as":
      return "aw"
    if self.mode == "pg-as":
      return "pg"
    return self.saliency

  def resolve(self, dataset_name: str) -> "RunConfig":
    """Fills dataset- and mode-dependent defaults (γ, ε_α)."""
    updates: dict[str, Any] = {}
    if self.gamma is None:
      updates["gamma"] = constants.DATASET_GAMMA.get(
          dataset_name, constants.DEFAULT_GAMMA
      )
    if self.epsilon is None:
      updates["epsilon"] = constants.MODE_EPSILON[self.effective_saliency]
    return self.model_copy(update=updates) if updates else self

  def train_config(self, progress: bool = False) -> TrainConfig:
    return TrainConfig(
        lr=self.lr,
        epochs=self.epochs,
        batch_size=self.batch,
        dropout=self.dropout,
        gamma=self.gamma if self.gamma is not None else constants.DEFAULT_GAMMA,
        patience=self.patience,
        seed=self.seed,
        regularize_with_dropout=self.regularize_with_dropout,
        dtype=self.dtype,
        progress=progress,
    )

  def mining_config(self) -> MiningConfig:
    epsilon = self.epsilon
    if epsilon is None:
      epsilon = constants.MODE_EPSILON[self.effective_saliency]
    return MiningConfig(
        k=self.k,
        epsilon=epsilon,
        saliency=self.effective_saliency,
        noise_samples=self.noise_n,
        noise_sigma=self.noise_sigma,
        continue_epochs=self.continue_epochs,
        random_mask=self.mode == "random-mask",
        seed=self.seed,
    )

  def to_key_value(self) -> str:
    """Renders the config as flat key=value text (None values omitted)."""
    lines = []
    for key, value in self.model_dump(mode="json").items():
      if value is None:
        continue
      if isinstance(value, bool):
        value = "true" if value else "false"
      lines.append(f"{key}={value}")
    lines.append(f"log_base={constants.LOG_BASE}")
    return "\n".join(lines) + "\n"


def parse_key_value(text: str, source: str = "<config>") -> dict[str, str]:
  """Parses flat key=value text; blank lines and `#` comments are skipped.

  Args:
      text: file contents.
      source: name used in error messages.

  Returns:
      dict[str, str]: raw values keyed by name, in file order.
  """
  values: dict[str, str] = {}
  for line_no, raw in enumerate(text.splitlines(), start=1):
    line = raw.strip()
    if not line or line.startswith("#"):
      continue
    if "=" not in line:
      raise ValueError(f"{source}:{line_no}: expected key=value, got {raw!r}")
    key, value = line.split("=", 1)
    values[key.strip()] = value.strip()
  # Informational line written with every effective config.
  values.pop("log_base", None)
  return values
