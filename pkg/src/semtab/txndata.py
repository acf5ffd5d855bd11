"""Transaction data model, JSONL serialization, and leakage-free temporal splits.

A log is an immutable, ordered list of transactions plus a per-user index of
time-sorted positions. Splits are by transaction timestamp with "months"
approximated as 30-day windows anchored at the log's earliest timestamp.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ParseError, SpanError

MONTH_SECONDS = 30 * 24 * 3600

# JSONL schema: exactly these keys, in this order.
_SCHEMA_KEYS = ("user_id", "ts", "amount", "merchant_raw", "mcc", "city",
                "state", "country", "anomaly")


@dataclass(frozen=True)
class Transaction:
    """One payment event."""

    user_id: str
    ts: int
    amount: float
    merchant_raw: str
    mcc: str
    city: str
    state_or_region: str
    country: str
    anomaly: bool

    def __post_init__(self):
        if not (self.ts > 0):
            raise ValueError(f"ts must be strictly positive, got {self.ts}")
        if not (math.isfinite(self.amount) and self.amount >= 0):
            raise ValueError(f"amount must be finite and >= 0, got {self.amount}")


class TransactionLog:
    """Immutable collection of transactions with a per-user, time-sorted index.

    Transactions keep their construction order (so serialization round-trips
    byte-identically); `user_index` maps user_id to positions sorted by
    timestamp, ties broken by position.
    """

    __slots__ = ("transactions", "user_index", "__weakref__")

    def __init__(self, transactions: list[Transaction]):
        object.__setattr__(self, "transactions", tuple(transactions))
        index: dict[str, list[int]] = {}
        for pos, txn in enumerate(self.transactions):
            index.setdefault(txn.user_id, []).append(pos)
        for user, positions in index.items():
            positions.sort(key=lambda p: (self.transactions[p].ts, p))
        object.__setattr__(self, "user_index", {u: tuple(ps) for u, ps in index.items()})

    def __setattr__(self, name, value):
        raise AttributeError("TransactionLog is immutable")

    def __len__(self) -> int:
        return len(self.transactions)

    def __iter__(self):
        return iter(self.transactions)

    def user_sequence(self, user_id: str) -> list[Transaction]:
        """Time-ordered transactions of one user."""
        return [self.transactions[p] for p in self.user_index.get(user_id, ())]

    def min_ts(self) -> int:
        return min(t.ts for t in self.transactions)

    def max_ts(self) -> int:
        return max(t.ts for t in self.transactions)

    def span_months(self) -> int:
        """Number of 30-day windows the log covers, counting both endpoints."""
        if not self.transactions:
            return 0
        return (self.max_ts() - self.min_ts()) // MONTH_SECONDS + 1


@dataclass(frozen=True)
class SplitSpec:
    """Month counts for train/val/test, in log order."""

    train_months: int
    val_months: int
    test_months: int

    def __post_init__(self):
        for name in ("train_months", "val_months", "test_months"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def total_months(self) -> int:
        return self.train_months + self.val_months + self.test_months


def _txn_to_obj(txn: Transaction) -> dict:
    return {
        "user_id": txn.user_id,
        "ts": txn.ts,
        "amount": txn.amount,
        "merchant_raw": txn.merchant_raw,
        "mcc": txn.mcc,
        "city": txn.city,
        "state": txn.state_or_region,
        "country": txn.country,
        "anomaly": 1 if txn.anomaly else 0,
    }


def write_log(log: TransactionLog, path: str | Path) -> None:
    """Serialize a log as canonical JSONL (UTF-8, one object per line)."""
    with open(path, "w", encoding="utf-8") as fh:
        for txn in log.transactions:
            fh.write(json.dumps(_txn_to_obj(txn), separators=(",", ":"), ensure_ascii=False))
            fh.write("\n")


def read_log(path: str | Path) -> TransactionLog:
    """Parse a JSONL transaction log.

    Raises ParseError (carrying the 1-based line number) on malformed lines or
    schema violations. Duplicate rows are allowed; real logs contain them.
    """
    transactions: list[Transaction] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line_no) from exc
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", line_no)
            missing = [k for k in _SCHEMA_KEYS if k not in obj]
            if missing:
                raise ParseError(f"missing keys: {missing}", line_no)
            extra = [k for k in obj if k not in _SCHEMA_KEYS]
            if extra:
                raise ParseError(f"unknown keys: {extra}", line_no)
            try:
                txn = Transaction(
                    user_id=str(obj["user_id"]),
                    ts=int(obj["ts"]),
                    amount=float(obj["amount"]),
                    merchant_raw=str(obj["merchant_raw"]),
                    mcc=str(obj["mcc"]),
                    city=str(obj["city"]),
                    state_or_region=str(obj["state"]),
                    country=str(obj["country"]),
                    anomaly=bool(int(obj["anomaly"])),
                )
            except (ValueError, TypeError) as exc:
                raise ParseError(str(exc), line_no) from exc
            transactions.append(txn)
    return TransactionLog(transactions)


def split_by_time(log: TransactionLog, spec: SplitSpec) -> tuple[TransactionLog, TransactionLog, TransactionLog]:
    """Split a log into (train, val, test) by 30-day months from the log start.

    Rows beyond the covered window are dropped. Timestamp ordering across
    adjacent splits is strict: max(train.ts) < min(val.ts) and
    max(val.ts) < min(test.ts). Users may appear in multiple splits.
    """
    if len(log) == 0:
        raise SpanError("cannot split an empty log")
    if log.span_months() < spec.total_months:
        raise SpanError(
            f"log spans {log.span_months()} months, split needs {spec.total_months}")
    start = log.min_ts()
    b1 = start + spec.train_months * MONTH_SECONDS
    b2 = b1 + spec.val_months * MONTH_SECONDS
    b3 = b2 + spec.test_months * MONTH_SECONDS
    train, val, test = [], [], []
    for txn in log.transactions:
        if txn.ts < b1:
            train.append(txn)
        elif txn.ts < b2:
            val.append(txn)
        elif txn.ts < b3:
            test.append(txn)
    return TransactionLog(train), TransactionLog(val), TransactionLog(test)
