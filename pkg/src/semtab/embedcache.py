"""Durable binary cache for prompt embeddings.

File layout (little-endian):

    magic   4 bytes  b"SEMB"
    version 1 byte   0x01
    dim     u32
    model_id  u32 length + utf-8 bytes
    records   repeated: u64 fingerprint, u32 key length + utf-8 key,
              dim * f32 vector
    crc32   u32 over all record bytes

The CRC trails the records so appends only rewrite the final four bytes.
A cache file is bound to one (model_id, dim); records are identified by
(key, prompt_fingerprint). Single writer, any number of readers after open.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .embedclient import EmbeddingRecord
from .errors import CacheConflictError, CacheCorruptError, ProtocolError

MAGIC = b"SEMB"
VERSION = 0x01


def _pack_record(record: EmbeddingRecord) -> bytes:
    key_bytes = record.key.encode("utf-8")
    return (struct.pack("<Q", record.prompt_fingerprint)
            + struct.pack("<I", len(key_bytes)) + key_bytes
            + record.vector.astype("<f4").tobytes())


class EmbeddingCache:
    """Open with `cache_open`; use get/put; close (or use as a context manager)."""

    def __init__(self, path: str | Path, dim: int | None = None,
                 model_id: str | None = None):
        self.path = Path(path)
        self._records: dict[tuple[str, int], EmbeddingRecord] = {}
        if self.path.exists() and self.path.stat().st_size > 0:
            self._load()
            if dim is not None and dim != self.dim:
                raise ProtocolError(f"cache dim {self.dim} != requested {dim}")
            if model_id is not None and model_id != self.model_id:
                raise ProtocolError(
                    f"cache model_id {self.model_id!r} != requested {model_id!r}")
        else:
            if dim is None or model_id is None:
                raise ProtocolError("creating a new cache requires dim and model_id")
            self.dim = int(dim)
            self.model_id = str(model_id)
            self._crc = 0
            self._init_file()
        self._fh = open(self.path, "r+b")

    def _init_file(self) -> None:
        model_bytes = self.model_id.encode("utf-8")
        header = (MAGIC + bytes([VERSION]) + struct.pack("<I", self.dim)
                  + struct.pack("<I", len(model_bytes)) + model_bytes)
        with open(self.path, "wb") as fh:
            fh.write(header + struct.pack("<I", 0))  # CRC of zero records

    def _load(self) -> None:
        blob = self.path.read_bytes()
        if len(blob) < 4 + 1 + 4 + 4 + 4 or blob[:4] != MAGIC:
            raise CacheCorruptError(f"{self.path}: bad magic or truncated header")
        if blob[4] != VERSION:
            raise CacheCorruptError(f"{self.path}: unsupported version {blob[4]}")
        off = 5
        (self.dim,) = struct.unpack_from("<I", blob, off)
        off += 4
        (mlen,) = struct.unpack_from("<I", blob, off)
        off += 4
        if off + mlen + 4 > len(blob):
            raise CacheCorruptError(f"{self.path}: truncated model_id")
        self.model_id = blob[off:off + mlen].decode("utf-8")
        off += mlen
        body = blob[off:-4]
        (stored_crc,) = struct.unpack_from("<I", blob, len(blob) - 4)
        if zlib.crc32(body) != stored_crc:
            raise CacheCorruptError(f"{self.path}: CRC mismatch")
        self._crc = stored_crc
        vec_bytes = self.dim * 4
        pos = 0
        while pos < len(body):
            if pos + 12 > len(body):
                raise CacheCorruptError(f"{self.path}: truncated record header")
            (fingerprint,) = struct.unpack_from("<Q", body, pos)
            (klen,) = struct.unpack_from("<I", body, pos + 8)
            pos += 12
            if pos + klen + vec_bytes > len(body):
                raise CacheCorruptError(f"{self.path}: truncated record")
            key = body[pos:pos + klen].decode("utf-8")
            pos += klen
            vector = np.frombuffer(body[pos:pos + vec_bytes], dtype="<f4").copy()
            pos += vec_bytes
            self._records[(key, fingerprint)] = EmbeddingRecord(
                key=key, prompt_fingerprint=fingerprint, model_id=self.model_id,
                dim=self.dim, vector=vector)

    def get(self, key: str, model_id: str, fingerprint: int) -> np.ndarray | None:
        if model_id != self.model_id:
            return None
        record = self._records.get((key, fingerprint))
        return None if record is None else record.vector.copy()

    def put(self, record: EmbeddingRecord) -> None:
        if record.model_id != self.model_id:
            raise ProtocolError(
                f"record model_id {record.model_id!r} != cache {self.model_id!r}")
        if record.dim != self.dim:
            raise ProtocolError(f"record dim {record.dim} != cache {self.dim}")
        existing = self._records.get((record.key, record.prompt_fingerprint))
        if existing is not None:
            if np.array_equal(existing.vector, record.vector):
                return  # idempotent re-put
            raise CacheConflictError(
                f"key {record.key!r} fingerprint {record.prompt_fingerprint:#x} "
                "already cached with a different vector")
        payload = _pack_record(record)
        self._crc = zlib.crc32(payload, self._crc)
        self._fh.seek(-4, 2)  # overwrite trailing CRC
        self._fh.write(payload + struct.pack("<I", self._crc))
        self._fh.flush()
        self._records[(record.key, record.prompt_fingerprint)] = record

    def records(self) -> list[EmbeddingRecord]:
        return list(self._records.values())

    def __len__(self) -> int:
        return len(self._records)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def cache_open(path: str | Path, dim: int | None = None,
               model_id: str | None = None) -> EmbeddingCache:
    """Open (or create) an embedding cache file."""
    return EmbeddingCache(path, dim=dim, model_id=model_id)
