"""Evaluation metrics: MAE and sMAPE for the amount task (currency units),
accuracy and macro-F1 for classification tasks, and the relative-improvement
percentage used where absolute scores cannot be compared directly.

sMAPE convention: mean(|y - yhat| / ((|y| + |yhat|) / 2)) / 2, with 0/0 terms
defined as 0 — the [0, 1]-normalized symmetric variant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..batching import Vocabularies, batches_for_eval
from ..errors import EmptyBatchError
from ..model import CLASS_TASKS, SeqTabModel, forward


def mean_absolute_error(y: np.ndarray, yhat: np.ndarray) -> float:
    errors = np.abs(np.asarray(y, dtype=np.float64)
                    - np.asarray(yhat, dtype=np.float64))
    # fsum: exactly rounded, summation-order independent
    return math.fsum(errors) / errors.size


def smape(y: np.ndarray, yhat: np.ndarray) -> float:
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    denom = (np.abs(y) + np.abs(yhat)) / 2.0
    terms = np.where(denom > 0.0, np.abs(y - yhat) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(np.mean(terms) / 2.0)


def accuracy(targets: np.ndarray, preds: np.ndarray) -> float:
    targets = np.asarray(targets)
    preds = np.asarray(preds)
    return float(np.mean(targets == preds))


def macro_f1(targets: np.ndarray, preds: np.ndarray) -> float:
    """Mean per-class F1 over the classes present in the targets."""
    targets = np.asarray(targets)
    preds = np.asarray(preds)
    scores = []
    for c in np.unique(targets):
        tp = int(np.sum((targets == c) & (preds == c)))
        fp = int(np.sum((targets != c) & (preds == c)))
        fn = int(np.sum((targets == c) & (preds != c)))
        scores.append(0.0 if tp == 0 else 2.0 * tp / (2.0 * tp + fp + fn))
    return float(np.mean(scores))


def relative_improvement(s_eval: float, s_base: float) -> float:
    """Percentage improvement of s_eval over a positive baseline score."""
    if s_base <= 0.0:
        raise ValueError(f"baseline score must be > 0, got {s_base}")
    return (s_eval - s_base) / s_base * 100.0


@dataclass(frozen=True)
class AmountMetrics:
    mae: float
    smape: float


@dataclass(frozen=True)
class ClassMetrics:
    acc: float
    macro_f1: float


@dataclass(frozen=True)
class MetricReport:
    next_amount: AmountMetrics
    next_mcc: ClassMetrics
    next_city: ClassMetrics
    next_merchant: ClassMetrics
    anomaly: ClassMetrics
    n_positions: int

    def to_dict(self) -> dict:
        return {
            "next_amount": {"mae": self.next_amount.mae, "smape": self.next_amount.smape},
            "next_mcc": {"acc": self.next_mcc.acc, "macro_f1": self.next_mcc.macro_f1},
            "next_city": {"acc": self.next_city.acc, "macro_f1": self.next_city.macro_f1},
            "next_merchant": {"acc": self.next_merchant.acc,
                              "macro_f1": self.next_merchant.macro_f1},
            "anomaly": {"acc": self.anomaly.acc, "macro_f1": self.anomaly.macro_f1},
            "n_positions": self.n_positions,
        }


def _gather_predictions(model: SeqTabModel, log, vocabs: Vocabularies,
                        batch_size: int = 64, task_weights=None):
    """Predicted/target pairs at every valid next-step position, plus the
    target-weighted mean loss over the same batches (one forward pass)."""
    from ..model import loss as loss_fn

    amounts_t, amounts_p = [], []
    class_t = {c: [] for c in CLASS_TASKS}
    class_p = {c: [] for c in CLASS_TASKS}
    anom_t, anom_p = [], []
    loss_sum, loss_n = 0.0, 0
    for batch in batches_for_eval(log, vocabs, model.cfg, batch_size,
                                  dtype=model.dtype):
        out = forward(model, batch)
        mask = batch.target_mask > 0
        if not mask.any():
            continue
        value, _ = loss_fn(out, batch, task_weights)
        k = batch.n_targets()
        loss_sum += value * k
        loss_n += k
        amounts_t.append(np.expm1(batch.target_amount[mask]))
        amounts_p.append(np.expm1(out.amount[mask]))
        for c in CLASS_TASKS:
            class_t[c].append(batch.target_tokens[c][mask])
            class_p[c].append(np.argmax(out.class_logits[c], axis=-1)[mask])
        anom_t.append(batch.target_anomaly[mask].astype(np.int64))
        anom_p.append((out.anomaly_prob[mask] > 0.5).astype(np.int64))
    if not amounts_t:
        raise EmptyBatchError("log has no valid next-step targets")
    return (np.concatenate(amounts_t), np.concatenate(amounts_p),
            {c: np.concatenate(class_t[c]) for c in CLASS_TASKS},
            {c: np.concatenate(class_p[c]) for c in CLASS_TASKS},
            np.concatenate(anom_t), np.concatenate(anom_p),
            loss_sum / max(loss_n, 1))


def evaluate(model: SeqTabModel, log, vocabs: Vocabularies,
             batch_size: int = 64) -> MetricReport:
    """Metric bundle over all valid positions of a log. Amount metrics are in
    currency units (inverse log1p transform applied)."""
    report, _ = evaluate_with_loss(model, log, vocabs, batch_size)
    return report


def evaluate_with_loss(model: SeqTabModel, log, vocabs: Vocabularies,
                       batch_size: int = 64,
                       task_weights=None) -> tuple[MetricReport, float]:
    """evaluate() plus the weighted loss over the same single forward pass."""
    a_t, a_p, c_t, c_p, n_t, n_p, mean_loss = _gather_predictions(
        model, log, vocabs, batch_size, task_weights)
    amount = AmountMetrics(mae=mean_absolute_error(a_t, a_p), smape=smape(a_t, a_p))

    def cls(c):
        return ClassMetrics(acc=accuracy(c_t[c], c_p[c]),
                            macro_f1=macro_f1(c_t[c], c_p[c]))

    report = MetricReport(
        next_amount=amount,
        next_mcc=cls("mcc"),
        next_city=cls("city"),
        next_merchant=cls("merchant"),
        anomaly=ClassMetrics(acc=accuracy(n_t, n_p), macro_f1=macro_f1(n_t, n_p)),
        n_positions=int(a_t.size),
    )
    return report, mean_loss


def merchant_accuracy_on(model: SeqTabModel, log, vocabs: Vocabularies,
                         merchant_names: frozenset[str] | set[str],
                         batch_size: int = 64) -> tuple[float, int]:
    """Next-merchant accuracy restricted to positions whose target merchant is
    in `merchant_names` (e.g. the cold-start set). Returns (acc, n_positions)."""
    indices = {vocabs.encode("merchant", name) for name in merchant_names}
    _, _, c_t, c_p, _, _, _ = _gather_predictions(model, log, vocabs, batch_size)
    targets, preds = c_t["merchant"], c_p["merchant"]
    keep = np.isin(targets, sorted(indices))
    if not keep.any():
        raise EmptyBatchError("no targets in the requested merchant subset")
    return accuracy(targets[keep], preds[keep]), int(keep.sum())
