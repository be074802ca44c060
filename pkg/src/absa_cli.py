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

"""absa-attn: prepare corpora, mine attention supervision, train, report.

Usage:
    absa-attn prepare --format semeval-xml --dataset laptop \\
        --train Laptops_Train.xml --test Laptops_Test_Gold.xml
    absa-attn run --dataset runs/data/laptop --mode pg-as --seed 1
    absa-attn report --run runs/laptop-pg-as-seed1 --limit 20
    absa-attn sweep --dataset runs/data/laptop --saliency aw
    absa-attn evaluate --dataset runs/data/laptop --checkpoint a.ckpt \\
        --against b.ckpt

Exit codes: 0 success, 1 a stage failed, 2 usage or configuration error.
"""

import argparse
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
import json
import logging
import os
from pathlib import Path
import sys

from pydantic import ValidationError

from . import constants
from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import (
    EncodedInstance,
    Vocabulary,
    build_vocab,
    encode_corpus,
    format_counts,
    load_corpus,
    load_embeddings,
    load_semeval_xml,
    load_twitter_3line,
    save_corpus,
    split_heldout,
)
from .evaluation import bootstrap_test, format_metrics, metrics_report
from .helpers import file_sha256, make_rng, read_jsonl, write_jsonl
from .memory_network import ModelParams, init_params
from .mining import run_mining
from .models.config_types import RunConfig, parse_key_value
from .models.corpus_types import (
    MetricsReport,
    MiningLogEntry,
    RunManifest,
    SplitManifest,
)
from .report import build_report, check_corpus_hash, render_html, render_text
from .synthetic import generate
from .training import prediction_set, train, train_supervised, write_history

logger = logging.getLogger(__name__)

FORMATS = ("semeval-xml", "twitter-3line", "synthetic")

# Flags whose values feed RunConfig; argparse dests equal the field names.
RUN_FIELDS = (
    "dataset", "out", "mode", "saliency", "embeddings", "k", "epsilon",
    "gamma", "noise_n", "noise_sigma", "lr", "dropout", "epochs", "batch",
    "patience", "seed", "dim", "dtype", "warm_start", "continue_epochs",
)


class ConfigError(ValueError):
  """Invalid command-line or config-file settings (exit code 2)."""


class StageError(RuntimeError):
  """A pipeline stage failed (exit code 1)."""

  def __init__(self, stage: str, cause: BaseException):
    super().__init__(f"stage {stage} failed: {cause}")
    self.stage = stage


@contextmanager
def stage(name: str) -> Iterator[None]:
  logger.info(f"Stage {name}")
  try:
    yield
  except (ValueError, OSError) as e:
    raise StageError(name, e) from e


def output_root() -> Path:
  return Path(os.environ.get(constants.OUTPUT_ROOT_ENV, "runs"))


# Prepared datasets


def load_prepared(
    dataset_dir: Path,
) -> tuple[SplitManifest, Vocabulary, list, list]:
  manifest = SplitManifest.model_validate_json(
      (dataset_dir / "split.json").read_text(encoding="utf-8")
  )
  vocab = Vocabulary.load(dataset_dir / "vocab.txt")
  train_set = load_corpus(dataset_dir / "train.jsonl")
  test_set = load_corpus(dataset_dir / "test.jsonl")
  return manifest, vocab, train_set, test_set


def split_encoded(
    manifest: SplitManifest, vocab: Vocabulary, instances: Sequence
) -> tuple[list[EncodedInstance], list[EncodedInstance]]:
  held = set(manifest.validation_ids)
  encoded = encode_corpus(instances, vocab)
  return (
      [e for e in encoded if e.id not in held],
      [e for e in encoded if e.id in held],
  )


def cmd_prepare(args: argparse.Namespace) -> int:
  out = Path(args.out) if args.out else output_root() / "data" / args.dataset
  with stage("prepare"):
    if args.format == "synthetic":
      train_set, test_set = generate(seed=args.seed)
    else:
      if not args.train or not args.test:
        raise ConfigError(f"--format {args.format} needs --train and --test")
      if args.format == "semeval-xml":
        loader = load_semeval_xml
      else:
        loader = load_twitter_3line
      train_set = loader(Path(args.train))
      test_set = loader(Path(args.test))
    vocab = build_vocab([*train_set, *test_set], min_count=args.min_count)
    _, validation = split_heldout(
        train_set, args.validation_fraction, make_rng(args.seed, "split")
    )
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(out / "train.jsonl", train_set)
    save_corpus(out / "test.jsonl", test_set)
    vocab.save(out / "vocab.txt")
    counts = {
        "train": format_counts(train_set),
        "test": format_counts(test_set),
    }
    manifest = SplitManifest(
        dataset=args.dataset,
        format=args.format,
        seed=args.seed,
        validation_fraction=args.validation_fraction,
        train_sha256=file_sha256(out / "train.jsonl"),
        test_sha256=file_sha256(out / "test.jsonl"),
        vocab_sha256=vocab.sha256(),
        validation_ids=[inst.id for inst in validation],
        counts=counts,
    )
    (out / "split.json").write_text(
        manifest.model_dump_json(indent=2) + "\n", encoding="utf-8"
    )
  for split, line in counts.items():
    print(f"{args.dataset} {split}: {line}")
  print(f"vocabulary: {len(vocab)} words; validation: {len(validation)}")
  logger.info(f"Prepared dataset written to {out}")
  return 0


# Runs


def load_run_config(args: argparse.Namespace) -> RunConfig:
  """Defaults, then the config file, then explicit flags."""
  values: dict[str, object] = {}
  if args.config:
    path = Path(args.config)
    try:
      text = path.read_text(encoding="utf-8")
      values.update(parse_key_value(text, str(path)))
    except (OSError, ValueError) as e:
      raise ConfigError(str(e)) from e
  for name in RUN_FIELDS:
    value = getattr(args, name, None)
    if value is not None:
      values[name] = value
  if "dataset" not in values:
    raise ConfigError("--dataset is required (flag or config file)")
  if "out" not in values:
    mode = values.get("mode", "pg-as")
    seed = values.get("seed", 0)
    values["out"] = output_root() / (
        f"{Path(str(values['dataset'])).name}-{mode}-seed{seed}"
    )
  try:
    return RunConfig.model_validate(values)
  except ValidationError as e:
    raise ConfigError(str(e)) from e


def initial_params(cfg: RunConfig, vocab: Vocabulary) -> ModelParams:
  embeddings = None
  if cfg.embeddings is not None:
    embeddings = load_embeddings(
        cfg.embeddings, vocab, cfg.dim, make_rng(cfg.seed, "embeddings")
    )
  return init_params(
      len(vocab),
      cfg.dim,
      make_rng(cfg.seed, "init"),
      embeddings=embeddings,
      init_range=cfg.init_range,
      dtype=cfg.dtype,
  )


def write_metrics(out: Path, reports: Sequence[MetricsReport]) -> None:
  write_jsonl(out / "metrics.jsonl", reports)
  (out / "metrics.txt").write_text(
      "\n".join(format_metrics(r) for r in reports), encoding="utf-8"
  )


def cmd_run(args: argparse.Namespace) -> int:
  cfg = load_run_config(args)
  progress = not args.quiet and sys.stderr.isatty()
  with stage("load"):
    manifest, vocab, train_set, test_set = load_prepared(cfg.dataset)
    cfg = cfg.resolve(manifest.dataset)
    train_enc, validation = split_encoded(manifest, vocab, train_set)
    test_enc = encode_corpus(test_set, vocab)
  out = cfg.out
  out.mkdir(parents=True, exist_ok=True)
  (out / "config.txt").write_text(cfg.to_key_value(), encoding="utf-8")
  (out / "run.json").write_text(
      RunManifest(
          dataset_dir=str(cfg.dataset),
          mode=cfg.mode,
          corpus_sha256=manifest.train_sha256,
          vocab_sha256=vocab.sha256(),
      ).model_dump_json(indent=2)
      + "\n",
      encoding="utf-8",
  )
  train_config = cfg.train_config(progress)

  with stage("init"):
    init = initial_params(cfg, vocab)
  with stage("baseline"):
    baseline = train(init, train_enc, train_config, validation)
    save_checkpoint(out / "baseline.ckpt", baseline.params, vocab)
    write_history(out / "baseline_history.jsonl", baseline.history)
  reports = []
  with stage("evaluate"):
    baseline_preds = prediction_set(baseline.params, test_enc)
    reports.append(metrics_report(baseline_preds, "baseline"))

  if cfg.mode != "baseline":
    with stage("mining"):
      mined = run_mining(
          train_enc, baseline.params, cfg.mining_config(), train_config
      )
      scope = {"as_a-only": "s_a", "as_m-only": "s_m"}.get(cfg.mode, "both")
      mined.corpus = mined.corpus.restrict(scope)
      mined.write(out)
    with stage("supervised"):
      start = mined.params_history[-1] if cfg.warm_start else init
      enhanced = train_supervised(start, mined.corpus, train_config, validation)
      save_checkpoint(out / "enhanced.ckpt", enhanced.params, vocab)
      write_history(out / "enhanced_history.jsonl", enhanced.history)
    with stage("evaluate"):
      enhanced_preds = prediction_set(enhanced.params, test_enc)
      p_values = bootstrap_test(
          enhanced_preds,
          baseline_preds,
          n=cfg.bootstrap_samples,
          rng=make_rng(cfg.seed, "bootstrap"),
      )
      reports.append(
          metrics_report(enhanced_preds, cfg.mode, p_values=p_values)
      )

  write_metrics(out, reports)
  for report in reports:
    print(format_metrics(report))
  return 0


def cmd_sweep(args: argparse.Namespace) -> int:
  """Tunes ε_α on the validation split over the documented grid."""
  cfg = load_run_config(args)
  grid = args.grid or list(constants.EPSILON_GRID)
  with stage("load"):
    manifest, vocab, train_set, _ = load_prepared(cfg.dataset)
    cfg = cfg.resolve(manifest.dataset)
    train_enc, validation = split_encoded(manifest, vocab, train_set)
    if not validation:
      raise ValueError("the prepared dataset has no validation split")
  train_config = cfg.train_config()
  with stage("baseline"):
    init = initial_params(cfg, vocab)
    baseline = train(init, train_enc, train_config, validation)

  results = []
  for epsilon in grid:
    with stage(f"sweep epsilon={epsilon}"):
      mining_config = cfg.mining_config().model_copy(
          update={"epsilon": epsilon}
      )
      mined = run_mining(
          train_enc, baseline.params, mining_config, train_config
      )
      start = mined.params_history[-1] if cfg.warm_start else init
      enhanced = train_supervised(start, mined.corpus, train_config, validation)
      report = metrics_report(
          prediction_set(enhanced.params, validation),
          f"{cfg.effective_saliency} epsilon={epsilon}",
          split="validation",
      )
    results.append((epsilon, report))
    print(
        f"epsilon={epsilon} val_accuracy={report.accuracy:.4f}"
        f" val_macro_f1={report.macro_f1:.4f}"
    )
  best_epsilon, best = max(results, key=lambda r: (r[1].accuracy, -r[0]))
  cfg.out.mkdir(parents=True, exist_ok=True)
  write_jsonl(cfg.out / "sweep.jsonl", [r for _, r in results])
  print(f"best epsilon={best_epsilon} val_accuracy={best.accuracy:.4f}")
  return 0


# Reports and evaluation


def cmd_report(args: argparse.Namespace) -> int:
  run_dir = Path(args.run)
  with stage("report"):
    manifest = RunManifest.model_validate_json(
        (run_dir / "run.json").read_text(encoding="utf-8")
    )
    dataset_dir = Path(args.dataset or manifest.dataset_dir)
    check_corpus_hash(
        manifest.corpus_sha256, file_sha256(dataset_dir / "train.jsonl")
    )
    vocab = Vocabulary.load(dataset_dir / "vocab.txt")
    instances = encode_corpus(load_corpus(dataset_dir / "train.jsonl"), vocab)
    log = read_jsonl(run_dir / "mining_log.jsonl", MiningLogEntry)
    checkpoint = Path(args.checkpoint) if args.checkpoint else (
        run_dir / "enhanced.ckpt"
    )
    params = load_checkpoint(checkpoint, vocab)
    ids = args.ids.split(",") if args.ids else None
    if ids is None and args.limit:
      ids = list(dict.fromkeys(e.id for e in log))[: args.limit]
    reports = build_report(instances, log, params, ids)
    out = Path(args.out) if args.out else run_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(render_text(reports), encoding="utf-8")
    (out / "report.html").write_text(
        render_html(reports, title=f"{run_dir.name} attention"),
        encoding="utf-8",
    )
  logger.info(f"Report for {len(reports)} instances written to {out}")
  return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
  with stage("evaluate"):
    dataset_dir = Path(args.dataset)
    manifest, vocab, train_set, test_set = load_prepared(dataset_dir)
    if args.split == "test":
      instances = encode_corpus(test_set, vocab)
    else:
      _, instances = split_encoded(manifest, vocab, train_set)
    params = load_checkpoint(Path(args.checkpoint), vocab)
    preds = prediction_set(params, instances)
    p_values = None
    if args.against:
      against = load_checkpoint(Path(args.against), vocab)
      other = prediction_set(against, instances)
      p_values = bootstrap_test(
          preds,
          other,
          n=args.bootstrap_samples,
          rng=make_rng(args.seed, "bootstrap"),
      )
    report = metrics_report(
        preds, Path(args.checkpoint).stem, split=args.split, p_values=p_values
    )
  print(format_metrics(report))
  return 0


# Argument parsing


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
  parser.add_argument("--dataset", help="Prepared dataset directory")
  parser.add_argument("--config", help="key=value config file")
  parser.add_argument("--out", help="Output directory")
  parser.add_argument("--mode", choices=constants.RUN_MODES)
  parser.add_argument(
      "--saliency",
      choices=["aw", "pg"],
      help="Saliency for random-mask and ablation modes (default pg)",
  )
  parser.add_argument("--embeddings", help="Word-vector text file")
  parser.add_argument("--k", type=int, help="Mining iterations")
  parser.add_argument("--epsilon", type=float, help="Entropy gate threshold")
  parser.add_argument("--gamma", type=float, help="Regularizer weight")
  parser.add_argument("--noise-n", dest="noise_n", type=int)
  parser.add_argument("--noise-sigma", dest="noise_sigma", type=float)
  parser.add_argument("--lr", type=float)
  parser.add_argument("--dropout", type=float)
  parser.add_argument("--epochs", type=int)
  parser.add_argument("--batch", type=int)
  parser.add_argument("--patience", type=int)
  parser.add_argument("--seed", type=int)
  parser.add_argument("--dim", type=int, help="Embedding width")
  parser.add_argument("--dtype", choices=["float64", "float32"])
  parser.add_argument(
      "--continue-epochs", dest="continue_epochs", type=int,
      help="Epochs of continued training per mining iteration",
  )
  parser.add_argument(
      "--warm-start",
      dest="warm_start",
      action="store_const",
      const=True,
      help="Start supervised training from the last mining parameters",
  )


def build_parser() -> argparse.ArgumentParser:
  parser = argparse.ArgumentParser(
      prog="absa-attn",
      description="Attention supervision mining for aspect sentiment",
  )
  verbosity = parser.add_mutually_exclusive_group()
  verbosity.add_argument("--verbose", action="store_true")
  verbosity.add_argument("--quiet", action="store_true")
  sub = parser.add_subparsers(dest="command", required=True)

  prepare = sub.add_parser("prepare", help="Normalize a raw corpus")
  prepare.add_argument("--format", required=True, choices=FORMATS)
  prepare.add_argument("--dataset", required=True, help="Dataset name")
  prepare.add_argument("--train", help="Raw training file")
  prepare.add_argument("--test", help="Raw test file")
  prepare.add_argument("--out", help="Output directory")
  prepare.add_argument("--min-count", dest="min_count", type=int, default=1)
  prepare.add_argument(
      "--validation-fraction",
      dest="validation_fraction",
      type=float,
      default=constants.DEFAULT_VALIDATION_FRACTION,
  )
  prepare.add_argument("--seed", type=int, default=0)
  prepare.set_defaults(handler=cmd_prepare)

  run = sub.add_parser("run", help="Baseline, mining, supervised training")
  _add_run_flags(run)
  run.set_defaults(handler=cmd_run)

  sweep = sub.add_parser("sweep", help="Tune the entropy gate on validation")
  _add_run_flags(sweep)
  sweep.add_argument("--grid", type=float, nargs="+")
  sweep.set_defaults(handler=cmd_sweep)

  report = sub.add_parser("report", help="Render attention heatmaps")
  report.add_argument("--run", required=True, help="Run directory")
  report.add_argument("--dataset", help="Prepared dataset directory")
  report.add_argument("--checkpoint", help="Defaults to the enhanced model")
  report.add_argument("--ids", help="Comma-separated instance ids")
  report.add_argument("--limit", type=int, default=50)
  report.add_argument("--out", help="Output directory")
  report.set_defaults(handler=cmd_report)

  evaluate = sub.add_parser("evaluate", help="Score a checkpoint")
  evaluate.add_argument("--dataset", required=True)
  evaluate.add_argument("--checkpoint", required=True)
  evaluate.add_argument("--against", help="Second checkpoint to test against")
  evaluate.add_argument(
      "--split", choices=["test", "validation"], default="test"
  )
  evaluate.add_argument(
      "--bootstrap-samples",
      dest="bootstrap_samples",
      type=int,
      default=constants.DEFAULT_BOOTSTRAP_SAMPLES,
  )
  evaluate.add_argument("--seed", type=int, default=0)
  evaluate.set_defaults(handler=cmd_evaluate)
  return parser


def main(argv: Sequence[str] | None = None) -> int:
  """Entry point of the `absa-attn` console script."""
  parser = build_parser()
  args = parser.parse_args(argv)
  level = logging.INFO
  if args.verbose:
    level = logging.DEBUG
  elif args.quiet:
    level = logging.WARNING
  logging.basicConfig(
      level=level,
      format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
  )
  try:
    return args.handler(args)
  except ConfigError as e:
    print(f"{parser.prog}: configuration error: {e}", file=sys.stderr)
    return 2
  except StageError as e:
    if isinstance(e.__cause__, ConfigError):
      print(
          f"{parser.prog}: configuration error: {e.__cause__}",
          file=sys.stderr,
      )
      return 2
    print(str(e), file=sys.stderr)
    return 1


if __name__ == "__main__":
  sys.exit(main())
