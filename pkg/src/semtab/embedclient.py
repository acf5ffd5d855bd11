"""Sentence-embedding clients: a deterministic in-process mock and a remote
hidden-state endpoint client with batching, bounded concurrency, and retries.

The mock embedder is a signed-hash bag-of-words: prompts sharing tokens get
nearby vectors, which is exactly the smoothing the enriched prompt texts are
designed to exploit. It makes the whole pipeline testable offline.

Remote wire protocol: POST {base_url}/embed {"prompts": [...]} returns
{"model_id": str, "dim": int, "embeddings": [[f32,...],...]}. A bearer token
is attached when the configured environment variable is set; the token is
never logged.
"""

from __future__ import annotations

import hashlib
import os
import re
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import requests

from .errors import BatchError, ProtocolError
from .prompts import fingerprint64

_TOKEN_RE = re.compile(r"[0-9a-z]+")


@dataclass(frozen=True)
class EmbeddingRecord:
    key: str
    prompt_fingerprint: int
    model_id: str
    dim: int
    vector: np.ndarray  # float32, length dim

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise ProtocolError(f"vector shape {vec.shape} != dim {self.dim}")
        if not np.all(np.isfinite(vec)):
            raise ProtocolError(f"non-finite embedding for key {self.key!r}")
        object.__setattr__(self, "vector", vec)

    def __eq__(self, other):
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (self.key == other.key
                and self.prompt_fingerprint == other.prompt_fingerprint
                and self.model_id == other.model_id
                and self.dim == other.dim
                and np.array_equal(self.vector, other.vector))


@dataclass(frozen=True)
class EmbedEndpointConfig:
    base_url: str
    auth_env: str = "EMBED_API_KEY"
    batch_size: int = 16
    max_concurrent_requests: int = 2
    max_attempts: int = 3
    backoff_s: float = 0.1
    timeout_s: float = 60.0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_concurrent_requests < 1:
            raise ValueError("max_concurrent_requests must be >= 1")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


MOCK_MODEL_ID = "mock-bow"


def mock_embed(prompt: str, dim: int, seed: int = 0) -> np.ndarray:
    """Deterministic signed-hash bag-of-words embedding, L2-normalized.

    Tokens are lowercase alphanumeric runs; each token hashes (with `seed`)
    to a bucket and a sign, term frequencies accumulate, and the result is
    unit-normalized. Token-free prompts map to the fixed basis vector e0.
    """
    if dim < 8:
        raise ValueError("dim must be >= 8")
    vec = np.zeros(dim, dtype=np.float64)
    tokens = _TOKEN_RE.findall(prompt.lower())
    if not tokens:
        out = np.zeros(dim, dtype=np.float32)
        out[0] = 1.0
        return out
    for token in tokens:
        digest = hashlib.blake2b(f"{seed}:{token}".encode("utf-8"),
                                 digest_size=8).digest()
        h = int.from_bytes(digest, "little")
        sign = 1.0 if h & (1 << 63) else -1.0
        vec[h % dim] += sign
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:  # sign cancellation across repeated tokens
        out = np.zeros(dim, dtype=np.float32)
        out[0] = 1.0
        return out
    return (vec / norm).astype(np.float32)


def mock_embed_records(prompts: list[tuple[str, str]], dim: int,
                       seed: int = 0) -> list[EmbeddingRecord]:
    """Embed (key, text) pairs with the mock embedder."""
    return [EmbeddingRecord(key=key, prompt_fingerprint=fingerprint64(text),
                            model_id=MOCK_MODEL_ID, dim=dim,
                            vector=mock_embed(text, dim, seed))
            for key, text in prompts]


def _auth_headers(cfg: EmbedEndpointConfig) -> dict[str, str]:
    token = os.environ.get(cfg.auth_env, "")
    if token:
        return {"Authorization": f"Bearer {token}"}
    return {}


def _post_batch(cfg: EmbedEndpointConfig, texts: list[str]) -> dict:
    url = cfg.base_url.rstrip("/") + "/embed"
    last_exc: Exception | None = None
    for attempt in range(cfg.max_attempts):
        if attempt > 0:
            time.sleep(cfg.backoff_s * (2 ** (attempt - 1)))
        try:
            resp = requests.post(url, json={"prompts": texts},
                                 headers=_auth_headers(cfg), timeout=cfg.timeout_s)
        except requests.RequestException as exc:
            last_exc = exc
            continue
        if resp.status_code >= 500:
            last_exc = RuntimeError(f"server error {resp.status_code}")
            continue
        if resp.status_code != 200:
            raise RuntimeError(f"embed endpoint returned {resp.status_code}: "
                               f"{resp.text[:200]}")
        return resp.json()
    raise last_exc if last_exc else RuntimeError("embed request failed")


def embed_remote(prompts: list[tuple[str, str]],
                 cfg: EmbedEndpointConfig) -> list[EmbeddingRecord]:
    """Embed (key, text) pairs against a remote endpoint.

    Requests are batched, issued with bounded concurrency, and retried per
    the config policy. Output order matches input order. If any batch still
    fails after retries, a BatchError names the failed prompt indices.
    """
    if not prompts:
        raise ValueError("prompts must be non-empty")
    batches = [prompts[i:i + cfg.batch_size]
               for i in range(0, len(prompts), cfg.batch_size)]
    offsets = np.cumsum([0] + [len(b) for b in batches])

    results: list[dict | None] = [None] * len(batches)
    failures: list[int] = []
    with ThreadPoolExecutor(max_workers=cfg.max_concurrent_requests) as pool:
        futures = {pool.submit(_post_batch, cfg, [t for _, t in batch]): bi
                   for bi, batch in enumerate(batches)}
        for fut, bi in futures.items():
            try:
                results[bi] = fut.result()
            except Exception:
                failures.append(bi)
    if failures:
        failed_indices = sorted(
            i for bi in failures for i in range(offsets[bi], offsets[bi + 1]))
        raise BatchError("remote embedding failed after retries", failed_indices)

    records: list[EmbeddingRecord] = []
    dim: int | None = None
    for bi, (batch, payload) in enumerate(zip(batches, results)):
        for field in ("model_id", "dim", "embeddings"):
            if field not in payload:
                raise ProtocolError(f"response missing field {field!r}")
        if len(payload["embeddings"]) != len(batch):
            raise ProtocolError(
                f"batch {bi}: {len(payload['embeddings'])} embeddings for "
                f"{len(batch)} prompts")
        if dim is None:
            dim = int(payload["dim"])
        elif int(payload["dim"]) != dim:
            raise ProtocolError(f"dim changed across responses: {dim} vs {payload['dim']}")
        for (key, text), vec in zip(batch, payload["embeddings"]):
            if len(vec) != dim:
                raise ProtocolError(f"vector length {len(vec)} != dim {dim}")
            records.append(EmbeddingRecord(
                key=key, prompt_fingerprint=fingerprint64(text),
                model_id=str(payload["model_id"]), dim=dim,
                vector=np.asarray(vec, dtype=np.float32)))
    return records
