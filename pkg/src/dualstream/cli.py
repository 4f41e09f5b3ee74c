"""Command-line surface: train, eval, predict, synth, validate.

Option resolution order is flags > config file (key=value lines) > defaults,
and the resolved values are logged. Exit codes: 0 success, 1 validation
findings or evaluation failure, 2 usage / configuration / I/O errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (
    Dataset,
    gen_synthetic,
    load_dataset,
    read_sample,
    validate_dataset,
    write_dataset,
)
from .errors import ConfigError, DualStreamError
from .metrics import confusion, confusion_to_pgm, emit, report
from .model import DualStreamModel, ModelConfig, class_names_for
from .training import TrainConfig, TrainingLog, train

log = logging.getLogger("dualstream")

DATA_DIR_ENV = "DUALSTREAM_DATA"

# (dest, type, default) per command; config-file keys use the dest name
_TRAIN_OPTS = [
    ("manifest", str, None),
    ("variant", str, "lstm"),
    ("epochs", int, 40),
    ("batch_size", int, 32),
    ("lr", float, 0.001),
    ("weight_decay", float, 0.01),
    ("seed", int, 0),
    ("hidden", int, 1024),
    ("heads", int, 8),
    ("layers", int, 2),
    ("d_ff", int, 2048),
    ("pooling", str, "mean"),
    ("mlp_hidden", int, 512),
    ("mlp_dropout", float, 0.3),
    ("encoder_dropout", float, 0.1),
    ("checkpoint_every", int, 0),
    ("report_every", int, 1),
    ("out", str, "run"),
]


def _parse_config_file(path: Path) -> dict[str, str]:
    values = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _coerce(raw: str, kind):
    if kind is bool:
        if raw.lower() in ("1", "true", "yes"):
            return True
        if raw.lower() in ("0", "false", "no"):
            return False
        raise ConfigError(f"expected a boolean, got {raw!r}")
    return kind(raw)


def _resolve(args: argparse.Namespace, opts) -> dict:
    """flags > config file > defaults, logging where each value came from."""
    file_values = {}
    if getattr(args, "config", None):
        file_values = _parse_config_file(Path(args.config))
    resolved = {}
    for dest, kind, default in opts:
        flag = getattr(args, dest, None)
        if flag is not None:
            resolved[dest] = flag
            source = "flag"
        elif dest in file_values:
            resolved[dest] = _coerce(file_values[dest], kind)
            source = "config file"
        else:
            resolved[dest] = default
            source = "default"
        log.info("config: %s = %r (%s)", dest, resolved[dest], source)
    unknown = set(file_values) - {dest for dest, _, _ in opts}
    if unknown:
        raise ConfigError(f"unknown config file keys: {sorted(unknown)}")
    return resolved


def _resolve_path(value: str) -> Path:
    """Relative paths fall back to the data directory named by the environment."""
    p = Path(value)
    if p.exists() or p.is_absolute():
        return p
    base = os.environ.get(DATA_DIR_ENV)
    if base and (Path(base) / p).exists():
        return Path(base) / p
    return p


def _dataset_shape(dataset: Dataset) -> tuple[int, int]:
    first = dataset.records[0].load()
    return first.frames, first.dim


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _resolve(args, _TRAIN_OPTS)
    if not cfg["manifest"]:
        raise ConfigError("train needs --manifest (or manifest= in the config file)")
    manifest = _resolve_path(cfg["manifest"])
    dataset = load_dataset(manifest)
    if not dataset.split("train"):
        raise ConfigError(f"{manifest}: dataset has no train split")
    frames, dim = _dataset_shape(dataset)
    model_cfg = ModelConfig(
        variant=cfg["variant"],
        frames=frames,
        feature_dim=dim,
        hidden=cfg["hidden"],
        mlp_hidden=cfg["mlp_hidden"],
        mlp_dropout=cfg["mlp_dropout"],
        encoder_dropout=cfg["encoder_dropout"],
        n_layers=cfg["layers"],
        heads=cfg["heads"],
        d_ff=cfg["d_ff"],
        pooling=cfg["pooling"],
        pe_max_len=max(512, frames + 1),
        seed=cfg["seed"],
    )
    train_cfg = TrainConfig(
        batch_size=cfg["batch_size"],
        epochs=cfg["epochs"],
        seed=cfg["seed"],
        checkpoint_every=cfg["checkpoint_every"],
        report_every=cfg["report_every"],
        lr=cfg["lr"],
        weight_decay=cfg["weight_decay"],
    )
    model = DualStreamModel.build(model_cfg)
    out_dir = Path(cfg["out"])
    train(model, dataset, train_cfg, out_dir=out_dir)
    print(f"checkpoints and training log written to {out_dir}")
    return 0


def _resolve_checkpoint(spec: str, run_dir: str | None) -> Path:
    """`best` picks the highest recorded val accuracy (ties: latest epoch)."""
    if spec != "best":
        return _resolve_path(spec)
    base = Path(run_dir) if run_dir else Path("run")
    log_path = base / "training_log.jsonl"
    if log_path.is_file():
        record = TrainingLog.read_jsonl(log_path).best_epoch()
        if record is not None:
            epoch_file = base / f"epoch_{record.epoch:04d}.vbnc"
            if epoch_file.is_file():
                return epoch_file
    best_file = base / "best.vbnc"
    if best_file.is_file():
        return best_file
    raise FileNotFoundError(f"no resolvable best checkpoint under {base}")


def cmd_eval(args: argparse.Namespace) -> int:
    checkpoint_path = _resolve_checkpoint(args.checkpoint, args.run_dir)
    if not checkpoint_path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {checkpoint_path}")
    model = load_checkpoint(checkpoint_path)
    dataset = load_dataset(_resolve_path(args.manifest))
    records = dataset.split(args.split)
    if not records:
        print(f"error: no samples in split {args.split!r}", file=sys.stderr)
        return 1
    _, dim = _dataset_shape(dataset)
    if dim != model.config.feature_dim:
        raise ConfigError(
            f"checkpoint expects feature dim {model.config.feature_dim}, "
            f"dataset provides {dim}"
        )
    trues, preds = [], []
    for record in records:
        sample = record.load()
        label, _ = model.predict(Tensor(sample.scene.values), Tensor(sample.face.values))
        trues.append(sample.label)
        preds.append(label)
    cm = confusion(trues, preds, model.config.n_classes)
    rep = report(cm)
    sys.stdout.write(emit(rep, args.format))
    csv_path = Path(args.confusion_csv)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(emit(rep, "csv"), encoding="utf-8")
    log.info("confusion matrix written to %s", csv_path)
    if args.confusion_pgm:
        Path(args.confusion_pgm).write_bytes(confusion_to_pgm(cm))
    return 0


def _predict_one(model: DualStreamModel, path: Path, prefix: str = "") -> None:
    sample = read_sample(path)
    if sample.dim != model.config.feature_dim:
        raise ConfigError(
            f"{path}: feature dim {sample.dim} does not match checkpoint "
            f"dim {model.config.feature_dim}"
        )
    label, probs = model.predict(Tensor(sample.scene.values), Tensor(sample.face.values))
    names = class_names_for(model.config.n_classes)
    print(prefix + names[label] + " " + " ".join(f"{p:.4f}" for p in probs))


def cmd_predict(args: argparse.Namespace) -> int:
    model = load_checkpoint(_resolve_path(args.checkpoint))
    target = _resolve_path(args.path)
    if target.is_dir():
        manifest = target / "manifest.jsonl"
        if manifest.is_file():
            files = [target / r.path for r in load_dataset(manifest).records]
        else:
            files = sorted(target.glob("*.vbfs"))
        for f in files:
            _predict_one(model, f, prefix=f"{f.name} ")
        return 0
    if not target.is_file():
        raise FileNotFoundError(f"no such sample file: {target}")
    _predict_one(model, target)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    dataset = gen_synthetic(
        n_per_class=args.per_class,
        frames=args.t,
        dim=args.d,
        separation=args.separation,
        seed=args.seed,
    )
    manifest = write_dataset(dataset, Path(args.out))
    print(f"wrote {len(dataset)} samples and {manifest}")
    return 0


def cmd_validate(args: argparse.Namespace) -> int:
    rep = validate_dataset(_resolve_path(args.manifest))
    for split, hist in rep.split_histograms.items():
        counts = " ".join(f"{label}:{n}" for label, n in sorted(hist.items()))
        print(f"split {split:<6} {counts if counts else '(empty)'}")
    for finding in rep.findings:
        print(f"finding: {finding}")
    if rep.findings:
        print(f"{len(rep.findings)} finding(s)")
        return 1
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dualstream",
        description="Dual-stream engagement classifier over per-frame feature sequences.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log option resolution")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a model from a dataset manifest")
    p_train.add_argument("--config", help="key=value config file; flags override it")
    p_train.add_argument("--manifest")
    p_train.add_argument("--variant", choices=("lstm", "transformer"))
    p_train.add_argument("--epochs", type=int)
    p_train.add_argument("--batch-size", type=int, dest="batch_size")
    p_train.add_argument("--lr", type=float)
    p_train.add_argument("--weight-decay", type=float, dest="weight_decay")
    p_train.add_argument("--seed", type=int)
    p_train.add_argument("--hidden", type=int)
    p_train.add_argument("--heads", type=int)
    p_train.add_argument("--layers", type=int)
    p_train.add_argument("--d-ff", type=int, dest="d_ff")
    p_train.add_argument("--pooling", choices=("mean", "cls"))
    p_train.add_argument("--mlp-hidden", type=int, dest="mlp_hidden")
    p_train.add_argument("--mlp-dropout", type=float, dest="mlp_dropout")
    p_train.add_argument("--encoder-dropout", type=float, dest="encoder_dropout")
    p_train.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p_train.add_argument("--report-every", type=int, dest="report_every")
    p_train.add_argument("--out", help="run directory for checkpoints and the log")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    p_eval.add_argument("--checkpoint", required=True, help="path, or 'best' with --run-dir")
    p_eval.add_argument("--run-dir", dest="run_dir")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--split", default="test", choices=("train", "val", "test"))
    p_eval.add_argument("--format", default="table", choices=("table", "csv", "json"))
    p_eval.add_argument("--confusion-csv", dest="confusion_csv", default="confusion.csv")
    p_eval.add_argument("--confusion-pgm", dest="confusion_pgm")
    p_eval.set_defaults(func=cmd_eval)

    p_pred = sub.add_parser("predict", help="predict labels for a sample file or directory")
    p_pred.add_argument("--checkpoint", required=True)
    p_pred.add_argument("path", help="one .vbfs file, or a directory of them")
    p_pred.set_defaults(func=cmd_predict)

    p_synth = sub.add_parser("synth", help="generate a synthetic dataset")
    p_synth.add_argument("--per-class", type=int, required=True, dest="per_class")
    p_synth.add_argument("--t", type=int, default=60)
    p_synth.add_argument("--d", type=int, default=1028)
    p_synth.add_argument("--separation", type=float, default=10.0)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--out", required=True)
    p_synth.set_defaults(func=cmd_synth)

    p_val = sub.add_parser("validate", help="check a dataset manifest and its files")
    p_val.add_argument("--manifest", required=True)
    p_val.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (DualStreamError, FileNotFoundError, IsADirectoryError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
