"""Multi-task training loop with validation-based model selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..batching import Vocabularies, collate, make_windows
from ..errors import DivergenceError
from ..model import AdamWState, Hyperparams, SeqTabModel
from ..model import step
from .metrics import MetricReport, evaluate_with_loss


@dataclass(frozen=True)
class TrainParams:
    epochs: int
    batch_size: int = 64
    lr: float = 1e-3
    weight_decay: float = 0.01
    seed: int = 0
    task_weights: dict[str, float] | None = None
    lr_schedule: str = "constant"  # or "cosine" (per-epoch decay)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be > 0")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError(f"unknown lr_schedule {self.lr_schedule!r}")

    def lr_for_epoch(self, epoch: int) -> float:
        if self.lr_schedule == "constant":
            return self.lr
        return self.lr * 0.5 * (1.0 + math.cos(math.pi * epoch / self.epochs))


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float
    val_report: MetricReport

    def to_dict(self) -> dict:
        return {"epoch": self.epoch, "train_loss": self.train_loss,
                "val_loss": self.val_loss, "val_report": self.val_report.to_dict()}


@dataclass
class TrainResult:
    model: SeqTabModel
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1


def train(model: SeqTabModel, train_log, val_log, vocabs: Vocabularies,
          params: TrainParams) -> TrainResult:
    """Run `params.epochs` epochs, recording per-epoch train loss and val
    metrics; returns the checkpoint with the best validation next-MCC accuracy
    (the primary model-selection metric). Deterministic for a fixed seed."""
    result = TrainResult(model=model)
    if params.epochs == 0:
        return result

    train_windows = make_windows(train_log, vocabs, model.cfg)
    rng = np.random.default_rng(params.seed)
    state = AdamWState.for_model(model)

    best_acc = -1.0
    best_params = None
    for epoch in range(params.epochs):
        hyper = Hyperparams(lr=params.lr_for_epoch(epoch),
                            weight_decay=params.weight_decay)
        order = rng.permutation(len(train_windows))
        epoch_loss, n_batches = 0.0, 0
        for i in range(0, len(order), params.batch_size):
            chunk = [train_windows[j] for j in order[i:i + params.batch_size]]
            batch = collate(chunk, dtype=model.dtype)
            try:
                total, _ = step(model, batch, state, hyper, params.task_weights)
            except DivergenceError as exc:
                exc.history = result.history
                raise
            epoch_loss += total
            n_batches += 1
        val_report, val_loss = evaluate_with_loss(model, val_log, vocabs,
                                                  params.batch_size,
                                                  params.task_weights)
        stats = EpochStats(
            epoch=epoch,
            train_loss=epoch_loss / max(n_batches, 1),
            val_loss=val_loss,
            val_report=val_report,
        )
        result.history.append(stats)
        if val_report.next_mcc.acc > best_acc:
            best_acc = val_report.next_mcc.acc
            best_params = {k: v.copy() for k, v in model.params.items()}
            result.best_epoch = epoch

    if best_params is not None:
        model.params.update(best_params)
    result.model = model
    return result
