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

"""Shared constants."""

MASK_TOKEN = "<mask>"
UNK_TOKEN = "<unk>"
MASK_ID = 0
UNK_ID = 1

NUM_CLASSES = 3
LABEL_NAMES = ("positive", "negative", "neutral")

SEMEVAL_POLARITY = {"positive": 0, "negative": 1, "neutral": 2}
TWITTER_POLARITY = {"1": 0, "-1": 1, "0": 2}
TWITTER_PLACEHOLDER = "$T$"

EMBEDDING_OOV_RANGE = 0.25
PARAM_INIT_RANGE = 0.01
DEFAULT_DIM = 300

DEFAULT_LR = 0.001
DEFAULT_DROPOUT = 0.3
DEFAULT_BATCH = 32
DEFAULT_EPOCHS = 30
DEFAULT_PATIENCE = 5
DEFAULT_K = 5
DEFAULT_NOISE_SAMPLES = 8
DEFAULT_NOISE_SIGMA = 0.01
DEFAULT_BOOTSTRAP_SAMPLES = 1000
DEFAULT_VALIDATION_FRACTION = 0.2

DATASET_GAMMA = {"laptop": 0.1, "rest": 0.5, "twitter": 0.1}
DEFAULT_GAMMA = 0.1

# Best MN thresholds on validation, natural log entropy.
MODE_EPSILON = {"aw": 3.0, "pg": 3.0}
EPSILON_GRID = (1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0)

RUN_MODES = (
    "baseline",
    "aw-as",
    "pg-as",
    "random-mask",
    "as_a-only",
    "as_m-only",
)

OUTPUT_ROOT_ENV = "ATTNSUP_OUTPUT_ROOT"
LOG_BASE = "e"

CHECKPOINT_MAGIC = b"MNCK"
CHECKPOINT_VERSION = 1
