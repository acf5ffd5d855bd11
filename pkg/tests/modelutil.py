"""Shared tiny-model fixtures for network/optimizer/grad-check tests."""

from __future__ import annotations

import numpy as np

from semtab.batching import Batch
from semtab.model import ModelConfig

TINY_CFG = ModelConfig(
    d_fields={"mcc": 6, "merchant": 8, "city": 6, "state": 4},
    d_amount=4, d_tdelta=4, n_tdelta_buckets=8,
    d_model=16, n_layers=2, n_heads=2, d_ff=32, max_seq_len=6,
)

TINY_VOCABS = {
    "mcc": ("[NULL]", "[OOV]", "1000", "1001", "1100", "1101"),
    "merchant": ("[NULL]", "[OOV]", "M1", "M2", "M3"),
    "city": ("[NULL]", "[OOV]", "CityA", "CityB"),
    "state": ("[NULL]", "[OOV]", "RegionX"),
}


def make_batch(lengths, seed=0, dtype=np.float64, max_extra_targets=True):
    """Random but valid batch; position t has a target iff t+1 < length
    (plus the final position when max_extra_targets, mimicking a window whose
    user sequence continues)."""
    rng = np.random.default_rng(seed)
    B, T = len(lengths), max(lengths)
    sizes = {f: len(v) for f, v in TINY_VOCABS.items()}

    tokens = {f: np.zeros((B, T), dtype=np.int32) for f in sizes}
    target_tokens = {f: np.zeros((B, T), dtype=np.int32)
                     for f in ("mcc", "city", "merchant")}
    amount = np.zeros((B, T), dtype=dtype)
    tdelta = np.zeros((B, T), dtype=np.int32)
    input_mask = np.zeros((B, T), dtype=dtype)
    target_mask = np.zeros((B, T), dtype=dtype)
    target_amount = np.zeros((B, T), dtype=dtype)
    target_anomaly = np.zeros((B, T), dtype=dtype)

    for i, L in enumerate(lengths):
        for f, size in sizes.items():
            tokens[f][i, :L] = rng.integers(2, size, L)
        amount[i, :L] = rng.uniform(0.5, 4.0, L)
        tdelta[i, :L] = rng.integers(0, TINY_CFG.n_tdelta_buckets, L)
        input_mask[i, :L] = 1.0
        n_tgt = L if max_extra_targets else L - 1
        for t in range(n_tgt):
            target_mask[i, t] = 1.0
            target_amount[i, t] = rng.uniform(0.5, 4.0)
            target_anomaly[i, t] = float(rng.random() < 0.2)
            for f in ("mcc", "city", "merchant"):
                target_tokens[f][i, t] = rng.integers(2, sizes[f])
    return Batch(tokens=tokens, amount=amount, tdelta=tdelta,
                 input_mask=input_mask, target_mask=target_mask,
                 target_amount=target_amount, target_tokens=target_tokens,
                 target_anomaly=target_anomaly)
