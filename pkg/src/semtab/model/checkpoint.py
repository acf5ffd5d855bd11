"""Versioned binary checkpoints: config, vocabularies, parameters (f32),
optimizer state, and RNG state. save -> load -> save is byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ParseError
from .config import ModelConfig
from .network import SeqTabModel
from .optim import AdamWState

MAGIC = b"STCK"
VERSION = 0x01


def save_checkpoint(model: SeqTabModel, path: str | Path,
                    opt_state: AdamWState | None = None,
                    rng_state: dict | None = None) -> None:
    names = sorted(model.params)
    buffer_names = sorted(model.buffers)
    manifest = {
        "config": dataclasses.asdict(model.cfg),
        "vocabs": {f: list(v) for f, v in model.vocab_values.items()},
        "params": [{"name": n, "shape": list(model.params[n].shape)} for n in names],
        "buffers": [{"name": n, "shape": list(model.buffers[n].shape)}
                    for n in buffer_names],
        "opt": None,
        "rng_state": rng_state,
    }
    tensors = [model.params[n] for n in names]
    tensors += [model.buffers[n] for n in buffer_names]
    if opt_state is not None:
        manifest["opt"] = {"step": opt_state.step, "names": names}
        tensors += [opt_state.m[n] for n in names] + [opt_state.v[n] for n in names]
    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC + bytes([VERSION]) + struct.pack("<I", len(blob)) + blob)
        for t in tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path):
    """Returns (model, opt_state or None, rng_state or None)."""
    raw = Path(path).read_bytes()
    if len(raw) < 9 or raw[:4] != MAGIC:
        raise ParseError(f"{path}: not a checkpoint file")
    if raw[4] != VERSION:
        raise ParseError(f"{path}: unsupported checkpoint version {raw[4]}")
    (blob_len,) = struct.unpack_from("<I", raw, 5)
    manifest = json.loads(raw[9:9 + blob_len].decode("utf-8"))
    cfg_dict = dict(manifest["config"])
    cfg_dict["d_fields"] = dict(cfg_dict["d_fields"])
    cfg = ModelConfig(**cfg_dict)
    vocabs = {f: tuple(v) for f, v in manifest["vocabs"].items()}

    off = 9 + blob_len

    def read_tensors(entries):
        nonlocal off
        out: dict[str, np.ndarray] = {}
        for entry in entries:
            size = int(np.prod(entry["shape"])) if entry["shape"] else 1
            arr = np.frombuffer(raw, dtype="<f4", count=size, offset=off).copy()
            out[entry["name"]] = arr.reshape(entry["shape"])
            off += size * 4
        return out

    params = read_tensors(manifest["params"])
    buffers = read_tensors(manifest.get("buffers", []))
    model = SeqTabModel(cfg, vocabs, params, buffers, dtype=np.float32)

    opt_state = None
    if manifest["opt"] is not None:
        names = manifest["opt"]["names"]
        m, v = {}, {}
        for store in (m, v):
            for name in names:
                shape = params[name].shape
                size = params[name].size
                arr = np.frombuffer(raw, dtype="<f4", count=size, offset=off).copy()
                store[name] = arr.reshape(shape)
                off += size * 4
        opt_state = AdamWState(step=int(manifest["opt"]["step"]), m=m, v=v)
    return model, opt_state, manifest.get("rng_state")
