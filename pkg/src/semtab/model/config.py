"""Model hyperparameters."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import ConfigurationError
from ..fields import CATEGORICAL_FIELDS

TASKS = ("amount", "mcc", "city", "merchant", "anomaly")


@dataclass(frozen=True)
class ModelConfig:
    d_fields: dict[str, int] = field(default_factory=lambda: {
        "mcc": 32, "merchant": 48, "city": 32, "state": 16})
    d_amount: int = 8
    d_tdelta: int = 8
    n_tdelta_buckets: int = 24
    d_model: int = 128
    n_layers: int = 2
    n_heads: int = 4
    d_ff: int = 256
    max_seq_len: int = 64
    init_scale: float = 0.02
    dropout: float = 0.0
    head_temperature: float = 1.0

    def __post_init__(self):
        if set(self.d_fields) != set(CATEGORICAL_FIELDS):
            raise ConfigurationError(f"d_fields must cover {CATEGORICAL_FIELDS}")
        dims = [*self.d_fields.values(), self.d_amount, self.d_tdelta,
                self.d_model, self.n_layers, self.n_heads, self.d_ff,
                self.max_seq_len, self.n_tdelta_buckets]
        if any(d < 1 for d in dims):
            raise ConfigurationError("all dimensions must be >= 1")
        if self.d_model % self.n_heads != 0:
            raise ConfigurationError("d_model must be divisible by n_heads")
        if not (0.0 <= self.dropout < 1.0):
            raise ConfigurationError("dropout must be in [0, 1)")

    @property
    def concat_width(self) -> int:
        return sum(self.d_fields[f] for f in CATEGORICAL_FIELDS) \
            + self.d_amount + self.d_tdelta
