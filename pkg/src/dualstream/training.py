"""Cross-entropy objective, AdamW updates, and the epoch training loop.

The loss over a mini-batch is the mean of per-sample cross-entropies; a batch
builds one graph and backpropagates once. AdamW decouples weight decay from
the moment-based update and applies it only to parameters flagged for decay
(weight matrices; never biases or layer-norm gains).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .autodiff import (
    Parameter,
    Tensor,
    backward,
    exp,
    log,
    narrow,
    reshape,
    sum_all,
)
from .checkpoint import save_checkpoint
from .data import Dataset, DatasetRecord, Sample
from .errors import ConfigError, ContractError
from .model import DualStreamModel

__all__ = [
    "cross_entropy",
    "cross_entropy_value",
    "batch_loss",
    "AdamW",
    "TrainConfig",
    "EpochRecord",
    "TrainingLog",
    "train",
    "evaluate_samples",
]


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    """-log softmax(logits)[label], via log-sum-exp for stability."""
    if logits.ndim != 1:
        raise ContractError(f"cross_entropy expects 1-D logits, got {list(logits.shape)}")
    n = logits.shape[0]
    if not (0 <= label < n):
        raise ContractError(f"label {label} outside [0, {n})")
    shifted = logits - float(logits.data.max())
    lse = log(sum_all(exp(shifted)))
    picked = reshape(narrow(shifted, 0, label, 1), ())
    return lse - picked


def cross_entropy_value(logits: np.ndarray, label: int) -> float:
    """Graph-free loss value, for evaluation passes."""
    shifted = logits - logits.max()
    return float(np.log(np.exp(shifted).sum()) - shifted[label])


def _stream_tensors(sample: Sample) -> tuple[Tensor, Tensor]:
    # float32 storage widens to float64 here
    return Tensor(sample.scene.values), Tensor(sample.face.values)


def batch_loss(
    model: DualStreamModel,
    batch: Sequence[Sample],
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Mean per-sample cross-entropy over a non-empty batch."""
    if not batch:
        raise ContractError("batch_loss needs a non-empty batch")
    total: Tensor | None = None
    for sample in batch:
        scene, face = _stream_tensors(sample)
        loss = cross_entropy(model.forward(scene, face, training, rng), sample.label)
        total = loss if total is None else total + loss
    return total * (1.0 / len(batch))


class AdamW:
    """Decoupled-weight-decay Adam. One shared step counter for all parameters."""

    def __init__(
        self,
        named_params: Sequence[tuple[str, Parameter]],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        if lr < 0:
            raise ConfigError(f"learning rate must be >= 0, got {lr}")
        if not (0 <= beta1 < 1 and 0 <= beta2 < 1):
            raise ConfigError(f"betas must be in [0, 1), got {beta1}, {beta2}")
        if eps <= 0:
            raise ConfigError(f"eps must be > 0, got {eps}")
        if weight_decay < 0:
            raise ConfigError(f"weight decay must be >= 0, got {weight_decay}")
        self.params = [(n, p) for n, p in named_params if p.trainable]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {n: np.zeros_like(p.data) for n, p in self.params}
        self.v = {n: np.zeros_like(p.data) for n, p in self.params}

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.zero_grad()

    def step(self) -> None:
        """One update from the current gradients; increments the shared counter once."""
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in self.params:
            g = p.grad
            if g.shape != p.data.shape:
                raise ContractError(
                    f"{name}: grad shape {list(g.shape)} != value shape {list(p.data.shape)}"
                )
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            if self.weight_decay and p.decay:
                p.data *= 1.0 - self.lr * self.weight_decay
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


@dataclass
class TrainConfig:
    """Loop hyperparameters plus the optimizer settings the CLI exposes."""

    batch_size: int = 32
    epochs: int = 40
    seed: int = 0
    shuffle: bool = True
    checkpoint_every: int = 0  # 0 disables periodic checkpoints
    report_every: int = 1  # progress-print cadence (0 silences)
    eval_train: bool = False  # also measure train-split accuracy each epoch
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float | None
    val_accuracy: float | None
    wall_seconds: float
    train_accuracy: float | None = None

    def to_json_dict(self) -> dict:
        d = {
            "epoch": self.epoch,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
            "wall_seconds": self.wall_seconds,
        }
        if self.train_accuracy is not None:
            d["train_accuracy"] = self.train_accuracy
        return d


@dataclass
class TrainingLog:
    records: list[EpochRecord] = field(default_factory=list)

    def write_jsonl(self, path: str | Path) -> Path:
        import json

        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            "".join(json.dumps(r.to_json_dict(), sort_keys=True) + "\n" for r in self.records),
            encoding="utf-8",
        )
        return path

    @classmethod
    def read_jsonl(cls, path: str | Path) -> "TrainingLog":
        import json

        records = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            records.append(
                EpochRecord(
                    epoch=d["epoch"],
                    train_loss=d["train_loss"],
                    val_loss=d["val_loss"],
                    val_accuracy=d["val_accuracy"],
                    wall_seconds=d["wall_seconds"],
                    train_accuracy=d.get("train_accuracy"),
                )
            )
        return cls(records)

    def best_epoch(self) -> EpochRecord | None:
        """Highest validation accuracy; ties resolve to the latest epoch."""
        best = None
        for r in self.records:
            if r.val_accuracy is None:
                continue
            if best is None or r.val_accuracy >= best.val_accuracy:
                best = r
        return best


def evaluate_samples(
    model: DualStreamModel, samples: Sequence[Sample]
) -> tuple[float | None, float | None]:
    """Eval-mode mean loss and accuracy; (None, None) on an empty list."""
    if not samples:
        return None, None
    losses = 0.0
    correct = 0
    for s in samples:
        scene, face = _stream_tensors(s)
        logits = model.forward(scene, face, training=False).data
        losses += cross_entropy_value(logits, s.label)
        if int(np.argmax(logits)) == s.label:
            correct += 1
    return losses / len(samples), correct / len(samples)


def _load_all(records: Sequence[DatasetRecord]) -> list[Sample]:
    return [r.load() for r in records]


def train(
    model: DualStreamModel,
    dataset: Dataset,
    config: TrainConfig,
    epoch_hook: Callable[[EpochRecord, DualStreamModel], bool] | None = None,
    out_dir: str | Path | None = None,
) -> TrainingLog:
    """Seeded epoch loop: shuffle, mini-batches, forward/backward/step, validate.

    Writes periodic, best (highest val accuracy, ties to latest), and final
    checkpoints plus the JSONL log when out_dir is given. epoch_hook may
    return True to stop early.
    """
    train_records = dataset.split("train")
    if not train_records:
        raise ContractError("training needs a non-empty train split")
    train_samples = _load_all(train_records)
    val_samples = _load_all(dataset.split("val"))

    rng = np.random.default_rng(config.seed)
    opt = AdamW(
        model.named_parameters(),
        lr=config.lr,
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.eps,
        weight_decay=config.weight_decay,
    )
    out_dir = Path(out_dir) if out_dir is not None else None
    log = TrainingLog()
    best_acc = None

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(len(train_samples)) if config.shuffle else np.arange(
            len(train_samples)
        )
        loss_sum = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [train_samples[i] for i in order[start : start + config.batch_size]]
            opt.zero_grad()
            loss = batch_loss(model, batch, training=True, rng=rng)
            backward(loss)
            opt.step()
            loss_sum += loss.item() * len(batch)
        train_loss = loss_sum / len(train_samples)
        val_loss, val_acc = evaluate_samples(model, val_samples)
        train_acc = None
        if config.eval_train:
            _, train_acc = evaluate_samples(model, train_samples)
        record = EpochRecord(
            epoch=epoch,
            train_loss=train_loss,
            val_loss=val_loss,
            val_accuracy=val_acc,
            wall_seconds=time.perf_counter() - t0,
            train_accuracy=train_acc,
        )
        log.records.append(record)
        if config.report_every and epoch % config.report_every == 0:
            acc_text = "n/a" if val_acc is None else f"{val_acc:.4f}"
            print(
                f"epoch {epoch:4d}  train_loss {train_loss:.6f}  val_accuracy {acc_text}"
            )
        if out_dir is not None:
            if config.checkpoint_every and epoch % config.checkpoint_every == 0:
                save_checkpoint(model, out_dir / f"epoch_{epoch:04d}.vbnc")
            if val_acc is not None and (best_acc is None or val_acc >= best_acc):
                best_acc = val_acc
                save_checkpoint(model, out_dir / "best.vbnc")
        if epoch_hook is not None and epoch_hook(record, model):
            break

    if out_dir is not None:
        save_checkpoint(model, out_dir / "final.vbnc")
        log.write_jsonl(out_dir / "training_log.jsonl")
    return log
