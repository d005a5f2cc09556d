"""Word embedding lookup with context dropout, and the bidirectional LSTM."""

from __future__ import annotations

import numpy as np

from . import numerics as nx
from .config import Hyperparams
from .numerics import Rng, Tensor


def init_encoder_params(vocab_size: int, hp: Hyperparams, rng: Rng, embeddings: np.ndarray | None = None) -> dict[str, Tensor]:
    """Embedding table plus forward/backward LSTM weights, all U(-s, s) but the pad row."""
    s = hp.init_scale
    if embeddings is None:
        table = rng.uniform(-s, s, (vocab_size, hp.d_w))
        table[0] = 0.0
    else:
        if embeddings.shape != (vocab_size, hp.d_w):
            raise nx.DimensionError(f"embedding table {embeddings.shape} != ({vocab_size}, {hp.d_w})")
        table = np.array(embeddings, dtype=np.float64)
    params = {"embedding": Tensor(table, requires_grad=True)}
    for direction in ("lstm_fw", "lstm_bw"):
        params[f"{direction}.w_ih"] = nx.init_uniform((4 * hp.d_h, hp.d_w), rng, s, True)
        params[f"{direction}.w_hh"] = nx.init_uniform((4 * hp.d_h, hp.d_h), rng, s, True)
        params[f"{direction}.b"] = nx.init_uniform((4 * hp.d_h,), rng, s, True)
    return params


def embed(table: Tensor, ids, mask=None, dropout_on: bool = False, rate: float = 0.5, rng: Rng | None = None) -> Tensor:
    """Row lookup; in training mode applies inverted dropout (kept entries scaled by 1/(1-rate))."""
    out = nx.embedding(table, ids)
    if dropout_on and rate > 0.0:
        if rng is None:
            raise ValueError("dropout needs an Rng")
        keep = 1.0 - rate
        drop_mask = (rng.random(out.shape) < keep) / keep
        out = nx.mul(out, drop_mask)
    return out


def bilstm(embedded: Tensor, mask, params: dict[str, Tensor]) -> Tensor:
    """[B, n, d_w] -> [B, n, 2 d_h]: forward and backward states concatenated per position."""
    single = embedded.ndim == 2
    if single:
        embedded = nx.reshape(embedded, (1,) + embedded.shape)
    if mask is None:
        mask = np.ones(embedded.shape[:2], dtype=bool)
    mask = np.asarray(mask, dtype=bool).reshape(embedded.shape[:2])
    fw = nx.lstm(embedded, mask, params["lstm_fw.w_ih"], params["lstm_fw.w_hh"], params["lstm_fw.b"])
    bw = nx.lstm(embedded, mask, params["lstm_bw.w_ih"], params["lstm_bw.w_hh"], params["lstm_bw.b"], reverse=True)
    h = nx.concat([fw, bw], axis=-1)
    return nx.reshape(h, h.shape[1:]) if single else h
