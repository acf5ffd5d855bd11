"""Multi-task sequential tabular transformer with hand-written backprop.

The forward graph: per-field embedding lookups are concatenated with
continuous features, projected to d_model, summed with learned positions,
passed through pre-norm causal self-attention blocks, and read out by five
task heads at every position (each position predicts the *next*
transaction). Classification heads are fixed-anchor classifiers: a learned
query is scored against frozen unit-normalized anchor rows (seeded by the
chosen initialization) with a learnable scalar gain. Freezing the class
matrix is what keeps never-trained (cold-start) vocabulary rows reachable:
free per-class rows would be buried by the steady softmax push-down on
absent classes. Input tables stay gather-only, so unused rows get exactly
zero gradient.

Gradients are exact reverse-mode derivatives of this graph, written out by
hand and verified against central finite differences (see gradcheck).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..batching import Batch
from ..embedtable import EmbeddingTable
from ..errors import ConfigurationError, EmptyBatchError, InputError
from .config import CATEGORICAL_FIELDS, ModelConfig

LN_EPS = 1e-5
NORM_EPS = 1e-12

CLASS_TASKS = ("mcc", "city", "merchant")

DEFAULT_TASK_WEIGHTS = {"amount": 1.0, "mcc": 1.0, "city": 1.0,
                        "merchant": 1.0, "anomaly": 1.0}

_GELU_C = float(np.sqrt(2.0 / np.pi))


class SeqTabModel:
    """Parameter container; mutated in place by the optimizer.

    `buffers` holds the frozen class-prior anchors (one per classification
    head): they are initialization artifacts, never touched by the optimizer.
    """

    def __init__(self, cfg: ModelConfig, vocab_values: dict[str, tuple[str, ...]],
                 params: dict[str, np.ndarray],
                 buffers: dict[str, np.ndarray] | None = None, dtype=np.float32,
                 dropout_seed: int = 0):
        self.cfg = cfg
        self.vocab_values = vocab_values
        self.params = params
        self.buffers = buffers or {}
        self.dtype = dtype
        self._dropout_rng = np.random.default_rng(dropout_seed)

    def vocab_size(self, field: str) -> int:
        return len(self.vocab_values[field])

    def astype(self, dtype) -> "SeqTabModel":
        params = {k: v.astype(dtype) for k, v in self.params.items()}
        buffers = {k: v.astype(dtype) for k, v in self.buffers.items()}
        return SeqTabModel(self.cfg, self.vocab_values, params, buffers, dtype=dtype)

    def copy(self) -> "SeqTabModel":
        params = {k: v.copy() for k, v in self.params.items()}
        buffers = {k: v.copy() for k, v in self.buffers.items()}
        return SeqTabModel(self.cfg, self.vocab_values, params, buffers,
                           dtype=self.dtype)


def param_spec(cfg: ModelConfig, vocab_sizes: dict[str, int]):
    """Canonical (name, shape, init) list; order fixes the RNG stream."""
    spec: list[tuple[str, tuple, str]] = []
    for f in CATEGORICAL_FIELDS:
        spec.append((f"emb.{f}", (vocab_sizes[f], cfg.d_fields[f]), "gauss"))
    spec.append(("emb.tdelta", (cfg.n_tdelta_buckets, cfg.d_tdelta), "gauss"))
    spec.append(("amount.w", (cfg.d_amount,), "gauss"))
    spec.append(("amount.b", (cfg.d_amount,), "zeros"))
    spec.append(("in.W", (cfg.concat_width, cfg.d_model), "gauss"))
    spec.append(("in.b", (cfg.d_model,), "zeros"))
    # zero-init positions: at init_scale the projected field content is tiny,
    # and a Gaussian positional table would drown it at the first layer norm
    spec.append(("pos", (cfg.max_seq_len, cfg.d_model), "zeros"))
    for l in range(cfg.n_layers):
        p = f"layer{l}"
        spec.append((f"{p}.ln1.g", (cfg.d_model,), "ones"))
        spec.append((f"{p}.ln1.b", (cfg.d_model,), "zeros"))
        for w in ("Wq", "Wk", "Wv", "Wo"):
            spec.append((f"{p}.attn.{w}", (cfg.d_model, cfg.d_model), "gauss"))
        # no key bias: a constant added to every key shifts each softmax row
        # uniformly, so it would be an exactly-zero-gradient direction
        for b in ("bq", "bv", "bo"):
            spec.append((f"{p}.attn.{b}", (cfg.d_model,), "zeros"))
        spec.append((f"{p}.ln2.g", (cfg.d_model,), "ones"))
        spec.append((f"{p}.ln2.b", (cfg.d_model,), "zeros"))
        spec.append((f"{p}.ff.W1", (cfg.d_model, cfg.d_ff), "gauss"))
        spec.append((f"{p}.ff.b1", (cfg.d_ff,), "zeros"))
        spec.append((f"{p}.ff.W2", (cfg.d_ff, cfg.d_model), "gauss"))
        spec.append((f"{p}.ff.b2", (cfg.d_model,), "zeros"))
    spec.append(("lnf.g", (cfg.d_model,), "ones"))
    spec.append(("lnf.b", (cfg.d_model,), "zeros"))
    spec.append(("head.amount.w", (cfg.d_model,), "gauss"))
    spec.append(("head.amount.b", (), "zeros"))
    spec.append(("head.anomaly.w", (cfg.d_model,), "gauss"))
    spec.append(("head.anomaly.b", (), "zeros"))
    for c in CLASS_TASKS:
        spec.append((f"head.{c}.P", (cfg.d_model, cfg.d_fields[c]), "gauss"))
        spec.append((f"head.{c}.b", (cfg.d_fields[c],), "zeros"))
        spec.append((f"head.{c}.g", (), "ones"))
    return spec


def anchor_spec(cfg: ModelConfig, vocab_sizes: dict[str, int]):
    """Frozen class-prior anchors, drawn after the parameters."""
    return [(f"head.{c}.A", (vocab_sizes[c], cfg.d_fields[c]), "gauss")
            for c in CLASS_TASKS]


def init_model(cfg: ModelConfig, vocab_values: dict[str, tuple[str, ...]],
               tables: dict[str, EmbeddingTable] | None = None, seed: int = 0,
               dtype=np.float32) -> SeqTabModel:
    """Initialize parameters; embedding tables (when given) overwrite the
    random rows verbatim, leaving every other tensor's draw untouched, so a
    vanilla and a semantic model from the same seed differ only in embeddings.
    """
    tables = tables or {}
    vocab_sizes = {f: len(vocab_values[f]) for f in CATEGORICAL_FIELDS}
    rng = np.random.default_rng(seed)

    def draw(shape, kind):
        if kind == "gauss":
            return (rng.standard_normal(shape) * cfg.init_scale).astype(dtype)
        if kind == "zeros":
            return np.zeros(shape, dtype=dtype)
        return np.ones(shape, dtype=dtype)

    params = {name: draw(shape, kind)
              for name, shape, kind in param_spec(cfg, vocab_sizes)}
    buffers = {name: draw(shape, kind)
               for name, shape, kind in anchor_spec(cfg, vocab_sizes)}
    for field, table in tables.items():
        if field not in cfg.d_fields:
            raise ConfigurationError(f"unknown table field {field!r}")
        if table.d_field != cfg.d_fields[field]:
            raise ConfigurationError(
                f"table {field}: d_field {table.d_field} != config {cfg.d_fields[field]}")
        if table.vocab != tuple(vocab_values[field]):
            raise ConfigurationError(f"table {field}: vocab order mismatch")
        params[f"emb.{field}"] = table.matrix.astype(dtype)
        if field in CLASS_TASKS:  # the class-prior anchor shares the semantic init
            buffers[f"head.{field}.A"] = table.matrix.astype(dtype).copy()
    return SeqTabModel(cfg, dict(vocab_values), params, buffers, dtype=dtype,
                       dropout_seed=seed)


@dataclass
class Outputs:
    """Per-position task outputs. Distributions are softmax-normalized."""

    amount: np.ndarray                  # (B,T) predicted next log1p amount
    class_probs: dict[str, np.ndarray]  # field -> (B,T,V)
    anomaly_prob: np.ndarray            # (B,T)
    class_logits: dict[str, np.ndarray]
    anomaly_logit: np.ndarray


def _layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + LN_EPS)
    xhat = xc * inv
    return g * xhat + b, (xhat, inv)


def _layer_norm_backward(dy, g, cache):
    xhat, inv = cache
    axes = tuple(range(dy.ndim - 1))
    dg = (dy * xhat).sum(axis=axes)
    db = dy.sum(axis=axes)
    dxhat = dy * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    dx = inv * (dxhat - m1 - xhat * m2)
    return dx, dg, db


def _gelu(u):
    # u*u*u, not u**3: np.power's float32 path is an order of magnitude slower
    inner = _GELU_C * (u + 0.044715 * (u * u * u))
    return 0.5 * u * (1.0 + np.tanh(inner)), inner


def _gelu_backward(du_out, u, inner):
    t = np.tanh(inner)
    sech2 = 1.0 - t * t
    d_inner = _GELU_C * (1.0 + 3 * 0.044715 * (u * u))
    return du_out * (0.5 * (1.0 + t) + 0.5 * u * sech2 * d_inner)


def _split_heads(x, n_heads):
    B, T, d = x.shape
    return x.reshape(B, T, n_heads, d // n_heads).transpose(0, 2, 1, 3)


def _merge_heads(x):
    B, H, T, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(B, T, H * dh)


def _validate_batch(model: SeqTabModel, batch: Batch) -> None:
    B, T = batch.shape
    if T > model.cfg.max_seq_len:
        raise InputError(f"sequence length {T} exceeds max_seq_len "
                         f"{model.cfg.max_seq_len}")
    for f in CATEGORICAL_FIELDS:
        hi = int(batch.tokens[f].max(initial=0))
        if hi >= model.vocab_size(f):
            raise InputError(f"{f} index {hi} out of vocab range "
                             f"{model.vocab_size(f)} (map OOV upstream)")
    for f in CLASS_TASKS:
        hi = int(batch.target_tokens[f].max(initial=0))
        if hi >= model.vocab_size(f):
            raise InputError(f"target {f} index {hi} out of vocab range")
    if int(batch.tdelta.max(initial=0)) >= model.cfg.n_tdelta_buckets:
        raise InputError("time-delta bucket out of range")


def _forward(model: SeqTabModel, batch: Batch, train: bool):
    """Run the graph; returns (head tensors, cache for backward)."""
    _validate_batch(model, batch)
    P = model.params
    cfg = model.cfg
    dt = model.dtype
    B, T = batch.shape

    amount = batch.amount.astype(dt)
    embeds = [P[f"emb.{f}"][batch.tokens[f]] for f in CATEGORICAL_FIELDS]
    td = P["emb.tdelta"][batch.tdelta]
    am = amount[..., None] * P["amount.w"] + P["amount.b"]
    x0 = np.concatenate([*embeds, am, td], axis=-1)
    x = x0 @ P["in.W"] + P["in.b"] + P["pos"][:T]

    causal = np.triu(np.full((T, T), -np.inf, dtype=dt), k=1)
    # python-float scale: a numpy float64 scalar would promote the graph
    scale = 1.0 / math.sqrt(cfg.d_model // cfg.n_heads)
    drop_p = cfg.dropout if train else 0.0

    cache = {"x0": x0, "amount": amount, "layers": [], "T": T, "drop_p": drop_p}
    for l in range(cfg.n_layers):
        p = f"layer{l}"
        h1, ln1_cache = _layer_norm(x, P[f"{p}.ln1.g"], P[f"{p}.ln1.b"])
        q = _split_heads(h1 @ P[f"{p}.attn.Wq"] + P[f"{p}.attn.bq"], cfg.n_heads)
        k = _split_heads(h1 @ P[f"{p}.attn.Wk"], cfg.n_heads)
        v = _split_heads(h1 @ P[f"{p}.attn.Wv"] + P[f"{p}.attn.bv"], cfg.n_heads)
        scores = q @ k.transpose(0, 1, 3, 2) * scale + causal
        mx = scores.max(axis=-1, keepdims=True)
        e = np.exp(scores - mx)
        attn = e / e.sum(axis=-1, keepdims=True)
        ctx = _merge_heads(attn @ v)
        o = ctx @ P[f"{p}.attn.Wo"] + P[f"{p}.attn.bo"]
        if drop_p > 0.0:
            mask_o = (model._dropout_rng.random(o.shape) >= drop_p) / (1.0 - drop_p)
            o = o * mask_o.astype(dt)
        else:
            mask_o = None
        x_attn = x + o
        h2, ln2_cache = _layer_norm(x_attn, P[f"{p}.ln2.g"], P[f"{p}.ln2.b"])
        u = h2 @ P[f"{p}.ff.W1"] + P[f"{p}.ff.b1"]
        gact, inner = _gelu(u)
        ff = gact @ P[f"{p}.ff.W2"] + P[f"{p}.ff.b2"]
        if drop_p > 0.0:
            mask_f = (model._dropout_rng.random(ff.shape) >= drop_p) / (1.0 - drop_p)
            ff = ff * mask_f.astype(dt)
        else:
            mask_f = None
        x_out = x_attn + ff
        cache["layers"].append({
            "ln1": ln1_cache, "h1": h1, "q": q, "k": k, "v": v, "attn": attn,
            "ctx": ctx, "mask_o": mask_o, "x_attn": x_attn, "ln2": ln2_cache,
            "h2": h2, "u": u, "inner": inner, "gact": gact, "mask_f": mask_f,
        })
        x = x_out

    h, lnf_cache = _layer_norm(x, P["lnf.g"], P["lnf.b"])
    cache["lnf"] = lnf_cache
    cache["h"] = h

    heads = {
        "amount": h @ P["head.amount.w"] + P["head.amount.b"],
        "anomaly": h @ P["head.anomaly.w"] + P["head.anomaly.b"],
    }
    cache["queries"] = {}
    tau = cfg.head_temperature
    for c in CLASS_TASKS:
        qc = h @ P[f"head.{c}.P"] + P[f"head.{c}.b"]
        A = model.buffers[f"head.{c}.A"]
        An = A / np.sqrt((A * A).sum(axis=1, keepdims=True) + NORM_EPS)
        # fixed-classifier head: scores against frozen unit-normalized anchor
        # rows with a learnable scalar gain. Free per-class rows are avoided
        # deliberately: under Adam the weak-but-consistent softmax push-down
        # on absent classes compounds into full-rate drift that buries
        # never-trained (cold-start) rows.
        raw = qc @ An.T
        cache["queries"][c] = (qc, raw, An)
        heads[c] = (tau * P[f"head.{c}.g"]) * raw
    return heads, cache


def _log_softmax(logits):
    mx = logits.max(axis=-1, keepdims=True)
    shifted = logits - mx
    lse = np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    return shifted - lse


def forward(model: SeqTabModel, batch: Batch) -> Outputs:
    """Inference pass (no dropout); per-position predictions for step t+1."""
    heads, _ = _forward(model, batch, train=False)
    class_logits = {c: heads[c] for c in CLASS_TASKS}
    class_probs = {c: np.exp(_log_softmax(heads[c])) for c in CLASS_TASKS}
    anomaly_prob = 1.0 / (1.0 + np.exp(-heads["anomaly"]))
    return Outputs(amount=heads["amount"], class_probs=class_probs,
                   anomaly_prob=anomaly_prob, class_logits=class_logits,
                   anomaly_logit=heads["anomaly"])


def loss(outputs: Outputs, batch: Batch,
         task_weights: dict[str, float] | None = None):
    """Weighted multi-task loss over valid target positions.

    Amount is mean squared error in log1p space; classification heads use
    cross-entropy; the anomaly head uses binary cross-entropy. Returns
    (total, per-task dict).
    """
    weights = dict(DEFAULT_TASK_WEIGHTS if task_weights is None else task_weights)
    if any(w < 0 for w in weights.values()) or not any(w > 0 for w in weights.values()):
        raise ValueError("task weights must be >= 0 with at least one > 0")
    m = batch.target_mask
    n = float(m.sum())
    if n == 0:
        raise EmptyBatchError("batch has no valid target positions")

    per_task: dict[str, float] = {}
    diff = outputs.amount - batch.target_amount
    per_task["amount"] = float((m * diff * diff).sum() / n)
    for c in CLASS_TASKS:
        logp = _log_softmax(outputs.class_logits[c])
        picked = np.take_along_axis(logp, batch.target_tokens[c][..., None],
                                    axis=-1)[..., 0]
        per_task[c] = float(-(m * picked).sum() / n)
    z = outputs.anomaly_logit
    y = batch.target_anomaly
    bce = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    per_task["anomaly"] = float((m * bce).sum() / n)

    total = float(sum(weights[t] * per_task[t] for t in per_task))
    return total, per_task


def forward_backward(model: SeqTabModel, batch: Batch,
                     task_weights: dict[str, float] | None = None,
                     train: bool = True):
    """One pass of loss + exact parameter gradients.

    Returns (total, per_task, grads) with grads keyed like model.params.
    Embedding rows never touched by the batch get exactly zero gradient.
    """
    weights = dict(DEFAULT_TASK_WEIGHTS if task_weights is None else task_weights)
    P = model.params
    cfg = model.cfg
    heads, cache = _forward(model, batch, train=train)

    m = batch.target_mask.astype(model.dtype)
    n = float(m.sum())
    if n == 0:
        raise EmptyBatchError("batch has no valid target positions")

    per_task: dict[str, float] = {}
    grads = {name: np.zeros_like(p) for name, p in P.items()}
    h = cache["h"]
    B, T = batch.shape
    dh = np.zeros_like(h)

    # amount head (MSE in log1p space)
    diff = heads["amount"] - batch.target_amount.astype(model.dtype)
    per_task["amount"] = float((m * diff * diff).sum() / n)
    dpred = weights["amount"] * 2.0 * m * diff / n
    grads["head.amount.w"] += np.einsum("bt,btd->d", dpred, h)
    grads["head.amount.b"] += dpred.sum()
    dh += dpred[..., None] * P["head.amount.w"]

    # anomaly head (BCE)
    z = heads["anomaly"]
    y = batch.target_anomaly.astype(model.dtype)
    bce = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    per_task["anomaly"] = float((m * bce).sum() / n)
    sig = 1.0 / (1.0 + np.exp(-z))
    dz = weights["anomaly"] * m * (sig - y) / n
    grads["head.anomaly.w"] += np.einsum("bt,btd->d", dz, h)
    grads["head.anomaly.b"] += dz.sum()
    dh += dz[..., None] * P["head.anomaly.w"]

    # classification heads (CE) over frozen anchors with scalar gain
    tau = cfg.head_temperature
    for c in CLASS_TASKS:
        logits = heads[c]
        logp = _log_softmax(logits)
        probs = np.exp(logp)
        targets = batch.target_tokens[c]
        picked = np.take_along_axis(logp, targets[..., None], axis=-1)[..., 0]
        per_task[c] = float(-(m * picked).sum() / n)
        dlogits = probs.copy()
        np.put_along_axis(
            dlogits, targets[..., None],
            np.take_along_axis(dlogits, targets[..., None], axis=-1) - 1.0,
            axis=-1)
        dlogits *= (weights[c] * m / n)[..., None]
        qc, raw, An = cache["queries"][c]
        dk = An.shape[1]
        grads[f"head.{c}.g"] += tau * float((dlogits * raw).sum())
        dqc = (tau * P[f"head.{c}.g"]) * (dlogits @ An)
        grads[f"head.{c}.P"] += h.reshape(-1, cfg.d_model).T @ dqc.reshape(-1, dk)
        grads[f"head.{c}.b"] += dqc.sum(axis=(0, 1))
        dh += dqc @ P[f"head.{c}.P"].T

    # final layer norm
    dx, dg, db = _layer_norm_backward(dh, P["lnf.g"], cache["lnf"])
    grads["lnf.g"] += dg
    grads["lnf.b"] += db

    scale = 1.0 / math.sqrt(cfg.d_model // cfg.n_heads)
    for l in reversed(range(cfg.n_layers)):
        p = f"layer{l}"
        c = cache["layers"][l]
        # feed-forward branch
        dff = dx if c["mask_f"] is None else dx * c["mask_f"].astype(model.dtype)
        grads[f"{p}.ff.W2"] += c["gact"].reshape(-1, cfg.d_ff).T @ dff.reshape(-1, cfg.d_model)
        grads[f"{p}.ff.b2"] += dff.sum(axis=(0, 1))
        dg_act = dff @ P[f"{p}.ff.W2"].T
        du = _gelu_backward(dg_act, c["u"], c["inner"])
        grads[f"{p}.ff.W1"] += c["h2"].reshape(-1, cfg.d_model).T @ du.reshape(-1, cfg.d_ff)
        grads[f"{p}.ff.b1"] += du.sum(axis=(0, 1))
        dh2 = du @ P[f"{p}.ff.W1"].T
        dxa, dg2, db2 = _layer_norm_backward(dh2, P[f"{p}.ln2.g"], c["ln2"])
        grads[f"{p}.ln2.g"] += dg2
        grads[f"{p}.ln2.b"] += db2
        dx_attn = dx + dxa  # residual
        # attention branch
        do = dx_attn if c["mask_o"] is None else dx_attn * c["mask_o"].astype(model.dtype)
        grads[f"{p}.attn.Wo"] += c["ctx"].reshape(-1, cfg.d_model).T @ do.reshape(-1, cfg.d_model)
        grads[f"{p}.attn.bo"] += do.sum(axis=(0, 1))
        dctx = _split_heads(do @ P[f"{p}.attn.Wo"].T, cfg.n_heads)
        dattn = dctx @ c["v"].transpose(0, 1, 3, 2)
        dv = c["attn"].transpose(0, 1, 3, 2) @ dctx
        ds = c["attn"] * (dattn - (dattn * c["attn"]).sum(axis=-1, keepdims=True))
        dq = ds @ c["k"] * scale
        dk_ = ds.transpose(0, 1, 3, 2) @ c["q"] * scale
        dq_m, dk_m, dv_m = (_merge_heads(t) for t in (dq, dk_, dv))
        h1 = c["h1"].reshape(-1, cfg.d_model)
        grads[f"{p}.attn.Wq"] += h1.T @ dq_m.reshape(-1, cfg.d_model)
        grads[f"{p}.attn.Wk"] += h1.T @ dk_m.reshape(-1, cfg.d_model)
        grads[f"{p}.attn.Wv"] += h1.T @ dv_m.reshape(-1, cfg.d_model)
        grads[f"{p}.attn.bq"] += dq_m.sum(axis=(0, 1))
        grads[f"{p}.attn.bv"] += dv_m.sum(axis=(0, 1))
        dh1 = (dq_m @ P[f"{p}.attn.Wq"].T + dk_m @ P[f"{p}.attn.Wk"].T
               + dv_m @ P[f"{p}.attn.Wv"].T)
        dxl, dg1, db1 = _layer_norm_backward(dh1, P[f"{p}.ln1.g"], c["ln1"])
        grads[f"{p}.ln1.g"] += dg1
        grads[f"{p}.ln1.b"] += db1
        dx = dx_attn + dxl  # residual

    # input projection and features
    T_len = cache["T"]
    grads["pos"][:T_len] += dx.sum(axis=0)
    grads["in.W"] += cache["x0"].reshape(-1, cfg.concat_width).T @ dx.reshape(-1, cfg.d_model)
    grads["in.b"] += dx.sum(axis=(0, 1))
    dx0 = dx @ P["in.W"].T
    offset = 0
    for f in CATEGORICAL_FIELDS:
        d_f = cfg.d_fields[f]
        np.add.at(grads[f"emb.{f}"], batch.tokens[f],
                  dx0[..., offset:offset + d_f])
        offset += d_f
    dam = dx0[..., offset:offset + cfg.d_amount]
    grads["amount.w"] += np.einsum("btd,bt->d", dam, cache["amount"])
    grads["amount.b"] += dam.sum(axis=(0, 1))
    offset += cfg.d_amount
    np.add.at(grads["emb.tdelta"], batch.tdelta,
              dx0[..., offset:offset + cfg.d_tdelta])

    total = float(sum(weights[t] * per_task[t] for t in per_task))
    return total, per_task, grads


def total_loss(model: SeqTabModel, batch: Batch,
               task_weights: dict[str, float] | None = None) -> float:
    """Forward-only scalar loss (used by the finite-difference oracle)."""
    heads, _ = _forward(model, batch, train=False)
    outputs = Outputs(amount=heads["amount"],
                      class_probs={},
                      anomaly_prob=np.empty(0),
                      class_logits={c: heads[c] for c in CLASS_TASKS},
                      anomaly_logit=heads["anomaly"])
    value, _ = loss(outputs, batch, task_weights)
    return value
