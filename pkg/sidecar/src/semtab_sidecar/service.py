"""FastAPI service exposing final-layer last-token hidden states.

Wire protocol:
    POST /embed {"prompts": [...], "model_id": optional}
        -> {"model_id": str, "dim": int, "embeddings": [[f32,...],...],
            "usage": {"prompt_tokens": int}}
    GET /health -> {"status": "ok"}
    GET /info   -> {"model_id": str, "dim": int}

Bearer-token auth is enforced when the EMBED_API_KEY environment variable is
set. Prompts longer than the model context window are rejected with 422 and
the offending indices; out-of-memory failures return 503 with Retry-After.
Vectors are float32 on the wire regardless of compute dtype.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass

import torch
from fastapi import Depends, FastAPI, HTTPException, Request
from pydantic import BaseModel

from .extract import extract_last_token_state


@dataclass(frozen=True)
class ServeConfig:
    model_name_or_path: str
    device: str = "cpu"
    max_batch: int = 16
    max_in_flight: int = 1
    dtype: str = "float32"

    def __post_init__(self):
        if self.max_batch < 1:
            raise ValueError("max_batch must be >= 1")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


class HiddenStateEmbedder:
    """Loads a causal LM backbone and serves last-token hidden states.

    Padding side is forced to the right: real tokens keep positions 0..L-1
    under absolute position embeddings, and causal attention means trailing
    pads cannot influence them, so batch composition never changes a
    prompt's vector.
    """

    def __init__(self, cfg: ServeConfig):
        from transformers import AutoModel, AutoTokenizer

        self.cfg = cfg
        self.tokenizer = AutoTokenizer.from_pretrained(cfg.model_name_or_path)
        if self.tokenizer.pad_token is None:
            self.tokenizer.pad_token = (self.tokenizer.eos_token
                                        or self.tokenizer.unk_token)
        self.tokenizer.padding_side = "right"
        dtype = getattr(torch, cfg.dtype)
        self.model = AutoModel.from_pretrained(cfg.model_name_or_path,
                                               dtype=dtype)
        self.model.to(cfg.device)
        self.model.eval()
        self.model_id = os.path.basename(str(cfg.model_name_or_path).rstrip("/"))
        self.dim = int(self.model.config.hidden_size)
        self.max_positions = int(getattr(self.model.config, "max_position_embeddings",
                                         getattr(self.model.config, "n_positions", 10 ** 9)))

    def token_lengths(self, prompts: list[str]) -> list[int]:
        return [len(ids) for ids in self.tokenizer(prompts)["input_ids"]]

    @torch.no_grad()
    def embed(self, prompts: list[str]) -> tuple[list[list[float]], int]:
        """Embeddings in prompt order plus total token count."""
        lengths = self.token_lengths(prompts)
        too_long = [i for i, n in enumerate(lengths)
                    if n > self.max_positions]
        if too_long:
            raise PromptTooLongError(too_long, self.max_positions)
        vectors: list[list[float]] = []
        for start in range(0, len(prompts), self.cfg.max_batch):
            chunk = prompts[start:start + self.cfg.max_batch]
            enc = self.tokenizer(chunk, return_tensors="pt", padding=True)
            enc = {k: v.to(self.cfg.device) for k, v in enc.items()}
            out = self.model(**enc)
            state = extract_last_token_state(out.last_hidden_state,
                                             enc["attention_mask"])
            vectors.extend(state.cpu().numpy().astype("float32").tolist())
        return vectors, sum(lengths)


class PromptTooLongError(Exception):
    def __init__(self, indices: list[int], limit: int):
        self.indices = indices
        self.limit = limit
        super().__init__(f"prompts {indices} exceed the {limit}-token context window")


class EmbedRequest(BaseModel):
    prompts: list[str]
    model_id: str | None = None


def create_app(embedder: HiddenStateEmbedder,
               api_key_env: str = "EMBED_API_KEY") -> FastAPI:
    app = FastAPI(title="semtab-sidecar")
    gate = threading.Semaphore(embedder.cfg.max_in_flight)

    def check_auth(request: Request):
        expected = os.environ.get(api_key_env, "")
        if not expected:
            return
        header = request.headers.get("Authorization", "")
        if header != f"Bearer {expected}":
            raise HTTPException(status_code=401, detail="invalid bearer token")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/info")
    def info():
        return {"model_id": embedder.model_id, "dim": embedder.dim}

    @app.post("/embed")
    def embed(request: EmbedRequest, _=Depends(check_auth)):
        if not request.prompts:
            raise HTTPException(status_code=422, detail="prompts must be non-empty")
        if request.model_id and request.model_id != embedder.model_id:
            raise HTTPException(
                status_code=422,
                detail=f"model_id {request.model_id!r} not served "
                       f"(loaded: {embedder.model_id!r})")
        try:
            with gate:
                vectors, tokens = embedder.embed(request.prompts)
        except PromptTooLongError as exc:
            raise HTTPException(status_code=422, detail={
                "error": "prompt exceeds context window",
                "indices": exc.indices, "limit": exc.limit})
        except torch.cuda.OutOfMemoryError as exc:
            raise HTTPException(status_code=503, detail="out of memory",
                                headers={"Retry-After": "5"}) from exc
        except RuntimeError as exc:
            if "out of memory" in str(exc).lower():
                raise HTTPException(status_code=503, detail="out of memory",
                                    headers={"Retry-After": "5"}) from exc
            raise
        return {"model_id": embedder.model_id, "dim": embedder.dim,
                "embeddings": vectors, "usage": {"prompt_tokens": tokens}}

    return app
