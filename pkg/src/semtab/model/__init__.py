from .config import CATEGORICAL_FIELDS, TASKS, ModelConfig
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check, unused_embedding_rows_have_zero_grad
from .network import (
    CLASS_TASKS,
    DEFAULT_TASK_WEIGHTS,
    Outputs,
    SeqTabModel,
    forward,
    forward_backward,
    init_model,
    loss,
    total_loss,
)
from .optim import AdamWState, Hyperparams, step

__all__ = [
    "CATEGORICAL_FIELDS", "TASKS", "ModelConfig", "CLASS_TASKS",
    "DEFAULT_TASK_WEIGHTS", "Outputs", "SeqTabModel", "forward",
    "forward_backward", "init_model", "loss", "total_loss", "AdamWState",
    "Hyperparams", "step", "grad_check", "unused_embedding_rows_have_zero_grad",
    "save_checkpoint", "load_checkpoint",
]
