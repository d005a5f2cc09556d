"""Source (C2A + C2F + PaS) and target (C2A + PaS) networks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics as nx
from .attention import (
    c2a,
    c2f,
    init_c2a_params,
    init_c2f_params,
    init_pas_params,
    pas,
    position_relevance_source,
    target_relevance_batch,
)
from .config import Hyperparams
from .corpus import Batch
from .encoder import bilstm, embed, init_encoder_params
from .losses import init_classifier_params, sentiment_logits
from .numerics import Rng, Tensor

# modules the target network inherits from the pretrained source network
SHARED_PREFIXES = ("embedding", "lstm_fw.", "lstm_bw.", "c2a.", "pas.")


class ParameterSet(dict):
    """Ordered name -> trainable Tensor mapping for one network."""

    def zero_grad(self) -> None:
        for p in self.values():
            p.grad = np.zeros_like(p.data)

    def grads(self) -> dict[str, np.ndarray]:
        return {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in self.items()}

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k, p in self.items():
            if arrays[k].shape != p.shape:
                raise nx.DimensionError(f"{k}: stored shape {arrays[k].shape} != {p.shape}")
            p.data = np.array(arrays[k], dtype=np.float64)

    def regularized(self) -> list[Tensor]:
        """Everything but the embedding table."""
        return [p for k, p in self.items() if k != "embedding"]

    def num_entries(self) -> int:
        return int(sum(p.data.size for p in self.values()))


@dataclass
class ForwardOutput:
    logits: Tensor
    v_o: Tensor
    alpha: Tensor
    M: Tensor
    gamma: Tensor
    p: Tensor | np.ndarray
    aux_logits: Tensor | None = None
    beta: Tensor | None = None
    gate: Tensor | None = None


class Network:
    """One MGAN branch. ``kind`` is 'source' (three hops) or 'target' (two hops)."""

    def __init__(self, kind: str, vocab_size: int, hp: Hyperparams, rng: Rng,
                 n_categories: int = 0, embeddings: np.ndarray | None = None, literal_eq9: bool = True):
        if kind not in ("source", "target"):
            raise ValueError(f"unknown network kind {kind!r}")
        if kind == "source" and n_categories < 1:
            raise ValueError("a source network needs at least one aspect category")
        self.kind = kind
        self.hp = hp
        self.vocab_size = vocab_size
        self.n_categories = n_categories if kind == "source" else 0
        self.literal_eq9 = literal_eq9
        params = init_encoder_params(vocab_size, hp, rng, embeddings)
        params.update(init_c2a_params(hp, rng))
        if kind == "source":
            params.update(init_c2f_params(hp, n_categories, rng))
        params.update(init_pas_params(hp, rng))
        params.update(init_classifier_params(hp, rng))
        self.params = ParameterSet(params)
        for name, p in self.params.items():
            p.name = name

    @property
    def has_c2f(self) -> bool:
        return self.kind == "source"

    def forward(self, batch: Batch, train: bool = False, rng: Rng | None = None) -> ForwardOutput:
        P = self.params
        ctx_mask = batch.context_mask
        e = embed(P["embedding"], batch.context_ids, ctx_mask, dropout_on=train,
                  rate=self.hp.dropout, rng=rng)
        e_asp = embed(P["embedding"], batch.aspect_ids)
        h = bilstm(e, ctx_mask, P)
        ca = c2a(h, e_asp, ctx_mask, batch.aspect_mask, P)
        out_extra = {}
        if self.has_c2f:
            cf = c2f(h, ca.h_a, ctx_mask, P)
            p = position_relevance_source(cf.beta, batch.lengths)
            r_a = cf.r_a
            out_extra = dict(aux_logits=cf.aux_logits, beta=cf.beta, gate=cf.gate)
        else:
            if not batch.is_target:
                raise ValueError("the target network needs aspect spans")
            p = target_relevance_batch(batch.lengths, batch.span_start, batch.span_len,
                                       batch.context_ids.shape[1], self.literal_eq9)
            r_a = ca.h_a
        ps = pas(h, r_a, p, ctx_mask, P)
        logits = sentiment_logits(ps.v_o, P)
        return ForwardOutput(logits=logits, v_o=ps.v_o, alpha=ca.alpha, M=ca.M,
                             gamma=ps.gamma, p=p, **out_extra)

    def copy(self) -> "Network":
        clone = Network.__new__(Network)
        clone.__dict__.update(self.__dict__)
        clone.params = ParameterSet(
            {k: Tensor(p.data.copy(), requires_grad=True, name=k) for k, p in self.params.items()}
        )
        return clone


def target_from_source(source: Network, rng: Rng, literal_eq9: bool | None = None) -> Network:
    """Fresh target network whose encoder, C2A and PaS weights copy the source's."""
    lit = source.literal_eq9 if literal_eq9 is None else literal_eq9
    target = Network("target", source.vocab_size, source.hp, rng, literal_eq9=lit)
    for name, p in target.params.items():
        if name.startswith(SHARED_PREFIXES):
            p.data = source.params[name].data.copy()
    return target
