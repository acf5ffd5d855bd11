"""Vocabularies and next-step training batches built from transaction logs.

Each user's time-ordered sequence is chunked into windows of at most
max_seq_len transactions. Position t of a window carries the transaction's
field indices plus continuous features (log1p amount, bucketized log time
delta), and its targets describe the user's *next* transaction — taken from
the full sequence, so window boundaries lose no supervision. Only the final
transaction of a user has no target.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .errors import EmptyBatchError
from .fields import CATEGORICAL_FIELDS, TARGET_FIELDS
from .fusion import NULL_TOKEN, clean_field
from .synthworld import SyntheticWorld
from .txndata import Transaction, TransactionLog

NULL_INDEX = 0
OOV_INDEX = 1


@dataclass(frozen=True)
class Vocabularies:
    values: dict[str, tuple[str, ...]]  # field -> ordered values, specials first

    def __post_init__(self):
        for field, vals in self.values.items():
            if vals[:2] != (NULL_TOKEN, "[OOV]"):
                raise ValueError(f"{field} vocab must start with [NULL], [OOV]")
        object.__setattr__(self, "_index", {
            field: {v: i for i, v in enumerate(vals)}
            for field, vals in self.values.items()})

    def size(self, field: str) -> int:
        return len(self.values[field])

    def encode(self, field: str, value: str) -> int:
        return self._index[field].get(value, OOV_INDEX)

    def decode(self, field: str, index: int) -> str:
        return self.values[field][index]


def _specials_first(values) -> tuple[str, ...]:
    ordered = sorted(v for v in set(values) if v != NULL_TOKEN)
    return (NULL_TOKEN, "[OOV]", *ordered)


def vocabs_from_world(world: SyntheticWorld) -> Vocabularies:
    """Vocabularies over the full synthetic universe (cold-start values included)."""
    return Vocabularies(values={
        "mcc": _specials_first(world.mcc_codes),
        "merchant": _specials_first(world.merchants),
        "city": _specials_first(world.cities),
        "state": _specials_first(world.cities.values()),
    })


def vocabs_from_log(log: TransactionLog) -> Vocabularies:
    """Vocabularies observed in a log (typically the train split)."""
    seen: dict[str, set] = {f: set() for f in CATEGORICAL_FIELDS}
    for t in log:
        seen["mcc"].add(clean_field(t.mcc, "mcc").text)
        seen["merchant"].add(clean_field(t.merchant_raw, "merchant").text)
        seen["city"].add(clean_field(t.city, "city").text)
        seen["state"].add(clean_field(t.state_or_region, "state").text)
    return Vocabularies(values={f: _specials_first(seen[f]) for f in CATEGORICAL_FIELDS})


def _field_value(txn: Transaction, field: str) -> str:
    raw = {"mcc": txn.mcc, "merchant": txn.merchant_raw, "city": txn.city,
           "state": txn.state_or_region}[field]
    return clean_field(raw, field).text


def tdelta_bucket(delta_seconds: int, n_buckets: int) -> int:
    """Log-spaced time-delta bucket; delta 0 (sequence start) is bucket 0."""
    if delta_seconds <= 0:
        return 0
    return min(int(np.log2(1.0 + delta_seconds)), n_buckets - 1)


@dataclass
class Batch:
    """Padded arrays, shape (B, T). Targets are masked where no successor exists."""

    tokens: dict[str, np.ndarray]     # int32 per categorical field
    amount: np.ndarray                # float, log1p of amount
    tdelta: np.ndarray                # int32 bucket ids
    input_mask: np.ndarray            # 1.0 at real positions
    target_mask: np.ndarray           # 1.0 where a next transaction exists
    target_amount: np.ndarray         # float, log1p of next amount
    target_tokens: dict[str, np.ndarray]  # int32, next mcc/city/merchant
    target_anomaly: np.ndarray        # float 0/1, next transaction's label

    @property
    def shape(self) -> tuple[int, int]:
        return self.amount.shape

    def n_targets(self) -> int:
        return int(self.target_mask.sum())


@dataclass(frozen=True)
class Window:
    """One user's window: raw per-position features before padding."""

    tokens: dict[str, list[int]]
    amount: list[float]
    tdelta: list[int]
    target_mask: list[float]
    target_amount: list[float]
    target_tokens: dict[str, list[int]]
    target_anomaly: list[float]

    def __len__(self) -> int:
        return len(self.amount)


_WINDOW_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def make_windows(log: TransactionLog, vocabs: Vocabularies,
                 cfg) -> list[Window]:
    """Chunk every user sequence into model windows, in deterministic order.

    Memoized per (log, vocabulary, window shape): grid runs re-encode the
    same splits many times."""
    cache_key = (id(vocabs), cfg.max_seq_len, cfg.n_tdelta_buckets)
    per_log = _WINDOW_CACHE.setdefault(log, {})
    if cache_key in per_log:
        return per_log[cache_key]
    windows = _build_windows(log, vocabs, cfg)
    per_log[cache_key] = windows
    return windows


def _build_windows(log: TransactionLog, vocabs: Vocabularies,
                   cfg) -> list[Window]:
    windows: list[Window] = []
    for user_id in sorted(log.user_index):
        seq = log.user_sequence(user_id)
        for start in range(0, len(seq), cfg.max_seq_len):
            chunk = seq[start:start + cfg.max_seq_len]
            tokens = {f: [] for f in CATEGORICAL_FIELDS}
            tgt_tokens = {f: [] for f in TARGET_FIELDS}
            amount, tdelta, t_mask, t_amount, t_anomaly = [], [], [], [], []
            for offset, txn in enumerate(chunk):
                pos = start + offset
                for f in CATEGORICAL_FIELDS:
                    tokens[f].append(vocabs.encode(f, _field_value(txn, f)))
                amount.append(float(np.log1p(txn.amount)))
                delta = txn.ts - seq[pos - 1].ts if pos > 0 else 0
                tdelta.append(tdelta_bucket(delta, cfg.n_tdelta_buckets))
                nxt = seq[pos + 1] if pos + 1 < len(seq) else None
                if nxt is None:
                    t_mask.append(0.0)
                    t_amount.append(0.0)
                    t_anomaly.append(0.0)
                    for f in TARGET_FIELDS:
                        tgt_tokens[f].append(0)
                else:
                    t_mask.append(1.0)
                    t_amount.append(float(np.log1p(nxt.amount)))
                    t_anomaly.append(1.0 if nxt.anomaly else 0.0)
                    for f in TARGET_FIELDS:
                        tgt_tokens[f].append(vocabs.encode(f, _field_value(nxt, f)))
            windows.append(Window(tokens=tokens, amount=amount, tdelta=tdelta,
                                  target_mask=t_mask, target_amount=t_amount,
                                  target_tokens=tgt_tokens,
                                  target_anomaly=t_anomaly))
    return windows


def collate(windows: list[Window], dtype=np.float32) -> Batch:
    """Pad a group of windows to a rectangular batch."""
    if not windows:
        raise EmptyBatchError("no windows to collate")
    B = len(windows)
    T = max(len(w) for w in windows)

    def pad_f(rows, fill=0.0):
        out = np.full((B, T), fill, dtype=dtype)
        for i, row in enumerate(rows):
            out[i, :len(row)] = row
        return out

    def pad_i(rows):
        out = np.zeros((B, T), dtype=np.int32)
        for i, row in enumerate(rows):
            out[i, :len(row)] = row
        return out

    input_mask = np.zeros((B, T), dtype=dtype)
    for i, w in enumerate(windows):
        input_mask[i, :len(w)] = 1.0
    return Batch(
        tokens={f: pad_i([w.tokens[f] for w in windows]) for f in CATEGORICAL_FIELDS},
        amount=pad_f([w.amount for w in windows]),
        tdelta=pad_i([w.tdelta for w in windows]),
        input_mask=input_mask,
        target_mask=pad_f([w.target_mask for w in windows]),
        target_amount=pad_f([w.target_amount for w in windows]),
        target_tokens={f: pad_i([w.target_tokens[f] for w in windows])
                       for f in TARGET_FIELDS},
        target_anomaly=pad_f([w.target_anomaly for w in windows]),
    )


def batches_for_eval(log: TransactionLog, vocabs: Vocabularies, cfg,
                     batch_size: int = 64, dtype=np.float32) -> list[Batch]:
    windows = make_windows(log, vocabs, cfg)
    return [collate(windows[i:i + batch_size], dtype)
            for i in range(0, len(windows), batch_size)]
