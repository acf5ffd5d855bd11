"""Model-ready embedding tables: vocabulary-ordered matrices built from
embedding records, with seeded Gaussian random projection when the source
dimension differs from the field dimension, and per-row RMS matching so the
semantic rows live at the same scale as a random init would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embedclient import EmbeddingRecord
from .errors import ConfigurationError, CoverageError, ProtocolError

NULL_INDEX = 0
OOV_INDEX = 1

DEFAULT_INIT_SCALE = 0.02


@dataclass(frozen=True)
class EmbeddingTable:
    field_kind: str
    vocab: tuple[str, ...]            # index 0 = [NULL], index 1 = [OOV]
    matrix: np.ndarray                # |vocab| x d_field float32
    provenance: dict

    def __post_init__(self):
        if self.matrix.shape[0] != len(self.vocab):
            raise ConfigurationError("matrix rows != vocab size")
        if not np.all(np.isfinite(self.matrix)):
            raise ConfigurationError("matrix contains non-finite values")

    @property
    def d_field(self) -> int:
        return self.matrix.shape[1]


def _rescale_rows(rows: np.ndarray, target_rms: float) -> np.ndarray:
    rms = np.sqrt(np.mean(rows ** 2, axis=1, keepdims=True))
    safe = np.where(rms > 1e-12, rms, 1.0)
    return np.where(rms > 1e-12, rows * (target_rms / safe), rows)


def build_table(field_kind: str, vocab: list[str],
                records: dict[str, EmbeddingRecord], d_field: int, seed: int,
                init_scale: float = DEFAULT_INIT_SCALE) -> EmbeddingTable:
    """Assemble a field's embedding table from per-value records.

    Rows are copied when the source dimension equals d_field, otherwise
    mapped through a fixed seeded Gaussian projection; every non-special row
    is rescaled to RMS `init_scale`. The [NULL] row is zero; the [OOV] row is
    the rescaled mean of all projected rows.
    """
    if len(vocab) < 2 or vocab[NULL_INDEX] != "[NULL]" or vocab[OOV_INDEX] != "[OOV]":
        raise ConfigurationError("vocab must start with [NULL], [OOV]")
    values = list(vocab[2:])
    missing = [v for v in values if v not in records]
    if missing:
        raise CoverageError(missing)

    used = [records[v] for v in values]
    model_ids = {r.model_id for r in used}
    dims = {r.dim for r in used}
    if len(dims) > 1:
        raise ProtocolError(f"inconsistent source dims: {sorted(dims)}")
    if len(model_ids) > 1:
        raise ProtocolError(f"records from multiple models: {sorted(model_ids)}")
    source_dim = dims.pop() if dims else d_field
    model_id = model_ids.pop() if model_ids else "none"

    matrix = np.zeros((len(vocab), d_field), dtype=np.float32)
    if values:
        src = np.stack([r.vector for r in used]).astype(np.float64)
        if source_dim == d_field:
            projected = src
        else:
            rng = np.random.default_rng(seed)
            proj = rng.standard_normal((source_dim, d_field)) / np.sqrt(d_field)
            projected = src @ proj
        matrix[2:] = _rescale_rows(projected, init_scale).astype(np.float32)
        oov = projected.mean(axis=0, keepdims=True)
        matrix[OOV_INDEX] = _rescale_rows(oov, init_scale).astype(np.float32)[0]

    return EmbeddingTable(
        field_kind=field_kind,
        vocab=tuple(vocab),
        matrix=matrix,
        provenance={"model_id": model_id, "projection_seed": seed,
                    "source_dim": source_dim, "init_scale": init_scale},
    )
