"""Finite-difference verification of the hand-written backward pass."""

from __future__ import annotations

import numpy as np

from ..batching import Batch
from .network import SeqTabModel, forward_backward, total_loss


def grad_check(model: SeqTabModel, batch: Batch, eps: float = 1e-5,
               task_weights: dict[str, float] | None = None):
    """Central finite differences against the analytic gradient, every element
    of every parameter tensor. Per tensor, the relative error compares the
    full gradient vectors, |a - n| / max(|a|, |n|, 1e-8) with |.| the L2 norm;
    returns (max over tensors, per-tensor dict).

    Run on a tiny double-precision model; dropout must be off.
    """
    if model.dtype != np.float64:
        raise ValueError("grad_check requires a float64 model")
    if model.cfg.dropout != 0.0:
        raise ValueError("grad_check requires dropout == 0")

    _, _, grads = forward_backward(model, batch, task_weights, train=False)
    worst = 0.0
    per_tensor: dict[str, float] = {}
    for name, p in model.params.items():
        analytic = grads[name].reshape(-1)
        numeric = np.zeros_like(analytic)
        flat = p.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            lp = total_loss(model, batch, task_weights)
            flat[i] = orig - eps
            lm = total_loss(model, batch, task_weights)
            flat[i] = orig
            numeric[i] = (lp - lm) / (2.0 * eps)
        na = float(np.linalg.norm(analytic))
        nn = float(np.linalg.norm(numeric))
        err = float(np.linalg.norm(analytic - numeric)) / max(na, nn, 1e-8)
        per_tensor[name] = err
        worst = max(worst, err)
    return worst, per_tensor


def unused_embedding_rows_have_zero_grad(model: SeqTabModel, batch: Batch) -> bool:
    """True iff every input-embedding row whose index is absent from the batch
    has an exactly-zero analytic gradient (gather-only tables)."""
    from .config import CATEGORICAL_FIELDS

    _, _, grads = forward_backward(model, batch, train=False)
    tables = {f"emb.{f}": batch.tokens[f] for f in CATEGORICAL_FIELDS}
    tables["emb.tdelta"] = batch.tdelta
    for name, tokens in tables.items():
        used = set(np.unique(tokens))
        g = grads[name]
        for row in range(g.shape[0]):
            if row not in used and np.any(g[row] != 0.0):
                return False
    return True
