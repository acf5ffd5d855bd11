"""AdamW with decoupled weight decay and bias-corrected moments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..batching import Batch
from ..errors import DivergenceError
from .network import SeqTabModel, forward_backward


@dataclass(frozen=True)
class Hyperparams:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("lr must be >= 0")


@dataclass
class AdamWState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_model(cls, model: SeqTabModel) -> "AdamWState":
        return cls(step=0,
                   m={k: np.zeros_like(p) for k, p in model.params.items()},
                   v={k: np.zeros_like(p) for k, p in model.params.items()})


def step(model: SeqTabModel, batch: Batch, state: AdamWState,
         hyper: Hyperparams, task_weights: dict[str, float] | None = None):
    """One AdamW update in place. Returns (total loss, per-task losses).

    Raises DivergenceError naming the offending task when the loss or any
    gradient goes non-finite.
    """
    total, per_task, grads = forward_backward(model, batch, task_weights)
    for task, value in per_task.items():
        if not np.isfinite(value):
            raise DivergenceError("non-finite loss", task=task)
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(f"non-finite gradient in {name}", task=None)

    state.step += 1
    t = state.step
    b1, b2 = hyper.beta1, hyper.beta2
    bc1 = 1.0 - b1 ** t
    bc2 = 1.0 - b2 ** t
    for name, p in model.params.items():
        g = grads[name]
        state.m[name] = b1 * state.m[name] + (1.0 - b1) * g
        state.v[name] = b2 * state.v[name] + (1.0 - b2) * g * g
        m_hat = state.m[name] / bc1
        v_hat = state.v[name] / bc2
        p -= (hyper.lr * (m_hat / (np.sqrt(v_hat) + hyper.eps))
              + hyper.lr * hyper.weight_decay * p).astype(p.dtype)
        if not np.all(np.isfinite(p)):
            raise DivergenceError(f"non-finite parameter {name} after update", task=None)
    return total, per_task
