"""Context2Aspect, Coarse2Fine and position-aware sentiment attention.

All functions work on padded batches: ``h`` is [B, n, 2 d_h], masks are boolean
[B, n] (context) or [B, m] (aspect), and ``lengths`` holds true sentence lengths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .config import Hyperparams
from .numerics import Rng, Tensor


class ValidationError(ValueError):
    pass


def init_c2a_params(hp: Hyperparams, rng: Rng) -> dict[str, Tensor]:
    s = hp.init_scale
    # one row: each (context word, aspect word) pair gets a scalar score
    return {
        "c2a.W_a": nx.init_uniform((1, 2 * hp.d_h + hp.d_w), rng, s, True),
        "c2a.b_a": nx.init_uniform((1,), rng, s, True),
    }


def init_c2f_params(hp: Hyperparams, n_categories: int, rng: Rng) -> dict[str, Tensor]:
    s, d2 = hp.init_scale, 2 * hp.d_h
    return {
        "c2f.W_f": nx.init_uniform((hp.d_u, d2 + hp.d_e), rng, s, True),
        "c2f.b_f": nx.init_uniform((hp.d_u,), rng, s, True),
        "c2f.u_f": nx.init_uniform((hp.d_u,), rng, s, True),
        "c2f.W_g": nx.init_uniform((hp.d_e, hp.d_e + d2), rng, s, True),
        "c2f.b_g": nx.init_uniform((hp.d_e,), rng, s, True),
        "c2f.W_proj": nx.init_uniform((hp.d_e, d2), rng, s, True),
        "aux.W": nx.init_uniform((n_categories, d2), rng, s, True),
        "aux.b": nx.init_uniform((n_categories,), rng, s, True),
    }


def init_pas_params(hp: Hyperparams, rng: Rng) -> dict[str, Tensor]:
    s = hp.init_scale
    return {
        "pas.W_o": nx.init_uniform((hp.d_u, 2 * hp.d_h + hp.d_e), rng, s, True),
        "pas.b_o": nx.init_uniform((hp.d_u,), rng, s, True),
        "pas.u_o": nx.init_uniform((hp.d_u,), rng, s, True),
    }


def _pool(weights: Tensor, values: Tensor) -> Tensor:
    """sum_i weights[b, i] * values[b, i, :] -> [B, d]."""
    B, n = weights.shape
    pooled = nx.matmul(nx.reshape(weights, (B, 1, n)), values)
    return nx.reshape(pooled, (B, values.shape[-1]))


def _additive_scores(h: Tensor, query: Tensor, W: Tensor, b: Tensor, u: Tensor) -> Tensor:
    """u^T tanh(W [h_i; query] + b) for every position i -> [B, n]."""
    B, n, _ = h.shape
    q = nx.broadcast_to(nx.reshape(query, (B, 1, query.shape[-1])), (B, n, query.shape[-1]))
    hidden = nx.tanh(nx.linear(nx.concat([h, q], axis=-1), W, b))
    z = nx.linear(hidden, nx.reshape(u, (1, u.shape[0])))
    return nx.reshape(z, (B, n))


# -- Context2Aspect ---------------------------------------------------------
@dataclass
class C2AOutput:
    alpha: Tensor   # [B, m]
    h_a: Tensor     # [B, d_e]
    M: Tensor       # [B, n, m]


def c2a(h: Tensor, aspect_emb: Tensor, context_mask, aspect_mask, params: dict[str, Tensor]) -> C2AOutput:
    """Aspect-word importance averaged over context rows, and the weighted aspect vector."""
    B, n, d2 = h.shape
    m = aspect_emb.shape[1]
    ctx = np.asarray(context_mask, dtype=bool)
    asp = np.asarray(aspect_mask, dtype=bool)
    W = params["c2a.W_a"]
    # W_a [h_i; e_j] splits into a context part and an aspect part
    sh = nx.linear(h, nx.take(W, slice(0, d2), axis=1))                 # [B, n, 1]
    se = nx.linear(aspect_emb, nx.take(W, slice(d2, None), axis=1))     # [B, m, 1]
    M = nx.tanh(nx.add(nx.add(sh, nx.reshape(se, (B, 1, m))), params["c2a.b_a"]))
    delta = nx.masked_softmax(M, asp[:, None, :], axis=-1)
    row_weights = ctx / ctx.sum(axis=1, keepdims=True)
    alpha = nx.reshape(nx.matmul(row_weights[:, None, :], delta), (B, m))
    h_a = _pool(alpha, aspect_emb)
    return C2AOutput(alpha, h_a, M)


# -- Coarse2Fine --------------------------------------------------------------
@dataclass
class C2FOutput:
    beta: Tensor        # [B, n]
    v_a: Tensor         # [B, 2 d_h]
    r_a: Tensor         # [B, d_e]
    aux_logits: Tensor  # [B, |C|]
    gate: Tensor        # [B, d_e]


def c2f(h: Tensor, h_a: Tensor, context_mask, params: dict[str, Tensor]) -> C2FOutput:
    """Locate the words realizing the category, predict it back, and fuse via a gate."""
    z = _additive_scores(h, h_a, params["c2f.W_f"], params["c2f.b_f"], params["c2f.u_f"])
    beta = nx.masked_softmax(z, context_mask)
    v_a = _pool(beta, h)
    aux_logits = nx.linear(v_a, params["aux.W"], params["aux.b"])
    gate = nx.sigmoid(nx.linear(nx.concat([v_a, h_a], axis=-1), params["c2f.W_g"], params["c2f.b_g"]))
    projected = nx.linear(v_a, params["c2f.W_proj"])
    r_a = nx.add(nx.mul(gate, h_a), nx.mul(nx.sub(1.0, gate), projected))
    return C2FOutput(beta, v_a, r_a, aux_logits, gate)


# -- position relevance -------------------------------------------------------
def position_relevance_target(n: int, m0: int, m: int, literal: bool = True) -> np.ndarray:
    """Proximity of each word to the aspect span [m0, m0+m) (0-based m0).

    With ``literal`` the zero band covers 1-based positions I0..I0+m where
    I0 = m0 + 1, i.e. m + 1 positions (clipped to the sentence). Otherwise the
    band is exactly the m aspect words.
    """
    if n < 1 or m < 1 or m0 < 0 or m0 + m > n:
        raise ValidationError(f"aspect span start={m0} len={m} does not fit sentence length {n}")
    i = np.arange(1, n + 1, dtype=np.float64)
    start = m0 + 1
    end = start + m if literal else start + m - 1
    p = np.zeros(n)
    left = i < start
    right = i > end
    p[left] = 1.0 - (start - i[left]) / n
    p[right] = 1.0 - (i[right] - end) / n
    return p


def target_relevance_batch(lengths, starts, span_lens, n_max: int, literal: bool = True) -> np.ndarray:
    out = np.zeros((len(lengths), n_max))
    for k, (n, m0, m) in enumerate(zip(lengths, starts, span_lens)):
        out[k, :n] = position_relevance_target(int(n), int(m0), int(m), literal)
    return out


def _location_product(x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Row k: L(n_k) @ x[k] with L_ii' = 1 - |i - i'| / n_k, via prefix sums.

    Entries of x beyond n_k must be zero; outputs beyond n_k are set to zero.
    """
    B, n_max = x.shape
    idx = np.arange(n_max, dtype=np.float64)
    s0 = np.cumsum(x, axis=1)
    s1 = np.cumsum(x * idx, axis=1)
    t0, t1 = s0[:, -1:], s1[:, -1:]
    # sum_{i'} |i - i'| x_i'
    dist = (idx * s0 - s1) + ((t1 - s1) - idx * (t0 - s0))
    out = t0 - dist / lengths[:, None]
    out[idx[None, :] >= lengths[:, None]] = 0.0
    return out


def location_matrix(n: int) -> np.ndarray:
    i = np.arange(n)
    return 1.0 - np.abs(i[:, None] - i[None, :]) / n


def position_relevance_source(beta: Tensor, lengths=None) -> Tensor:
    """p = L beta with L_ii' = 1 - |i - i'| / n, without forming L.

    Accepts a single distribution [n] or a padded batch [B, n_max] with true
    ``lengths``. Since L is symmetric, the backward rule is the same product.
    """
    single = beta.ndim == 1
    b = beta.data.reshape(1, -1) if single else beta.data
    if lengths is None:
        lengths = np.full(b.shape[0], b.shape[1])
    lengths = np.asarray(lengths, dtype=np.float64)
    totals = b.sum(axis=1)
    if np.any(np.abs(totals - 1.0) > 1e-8):
        raise ValidationError(f"beta is not a probability vector (sums {totals.tolist()})")
    p = _location_product(b, lengths)

    valid = np.arange(b.shape[1])[None, :] < lengths[:, None]

    def backward(g):
        g2 = np.where(valid, g.reshape(b.shape), 0.0)
        return (_location_product(g2, lengths).reshape(beta.shape),)

    return nx.custom_op(p.reshape(beta.shape), "position_relevance_source", (beta,), backward)


# -- position-aware sentiment --------------------------------------------------
@dataclass
class PaSOutput:
    gamma: Tensor   # [B, n]
    v_o: Tensor     # [B, 2 d_h]
    z: Tensor       # [B, n]


def pas(h: Tensor, r_a: Tensor, p, context_mask, params: dict[str, Tensor]) -> PaSOutput:
    """Sentiment attention with relevance multiplying each score inside the exponent."""
    z = _additive_scores(h, r_a, params["pas.W_o"], params["pas.b_o"], params["pas.u_o"])
    gamma = nx.masked_softmax(nx.mul(p, z), context_mask)
    return PaSOutput(gamma, _pool(gamma, h), z)
