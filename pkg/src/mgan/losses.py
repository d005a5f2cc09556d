"""Sentiment, auxiliary, contrastive alignment and regularization objectives."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import numerics as nx
from .config import Hyperparams
from .numerics import Rng, Tensor

N_SENTIMENTS = 3


def init_classifier_params(hp: Hyperparams, rng: Rng) -> dict[str, Tensor]:
    s = hp.init_scale
    return {
        "clf.W_fc": nx.init_uniform((hp.fc, 2 * hp.d_h), rng, s, True),
        "clf.b_fc": nx.init_uniform((hp.fc,), rng, s, True),
        "clf.W_out": nx.init_uniform((N_SENTIMENTS, hp.fc), rng, s, True),
        "clf.b_out": nx.init_uniform((N_SENTIMENTS,), rng, s, True),
    }


def sentiment_logits(v_o: Tensor, params: dict[str, Tensor]) -> Tensor:
    hidden = nx.tanh(nx.linear(v_o, params["clf.W_fc"], params["clf.b_fc"]))
    return nx.linear(hidden, params["clf.W_out"], params["clf.b_out"])


def cross_entropy(logits: Tensor, labels) -> Tensor:
    """-log softmax(logits)[label], averaged over rows when batched."""
    return nx.cross_entropy(logits, labels)


def contrastive_omega(u: Tensor, v: Tensor, same_label: bool, margin: float = 1.0) -> Tensor:
    """||u-v||^2 for a same-class pair, max(0, D - ||u-v||^2) otherwise."""
    u, v = nx.as_tensor(u), nx.as_tensor(v)
    if u.shape != v.shape:
        raise nx.DimensionError(f"contrastive_omega: {u.shape} vs {v.shape}")
    d = nx.sq_euclidean(u, v)
    return d if same_label else nx.relu(nx.sub(margin, d))


def pairwise_sq_distances(source_reps: Tensor, target_reps: Tensor) -> Tensor:
    Bs, D = source_reps.shape
    Bt = target_reps.shape[0]
    return nx.sq_euclidean(nx.reshape(source_reps, (Bs, 1, D)), nx.reshape(target_reps, (1, Bt, D)))


def cfa_loss(source_reps: Tensor, source_labels, target_reps: Tensor, target_labels, margin: float = 1.0) -> Tensor:
    """Mean contrastive term over every (source, target) pair of the two batches."""
    source_labels = np.asarray(source_labels)
    target_labels = np.asarray(target_labels)
    if source_reps.shape[0] == 0 or target_reps.shape[0] == 0:
        raise nx.DomainError("cfa_loss needs nonempty batches")
    if source_reps.shape[1] != target_reps.shape[1]:
        raise nx.DimensionError(f"cfa_loss: {source_reps.shape} vs {target_reps.shape}")
    d = pairwise_sq_distances(source_reps, target_reps)
    same = (source_labels[:, None] == target_labels[None, :]).astype(np.float64)
    omega = nx.add(nx.mul(same, d), nx.mul(1.0 - same, nx.relu(nx.sub(margin, d))))
    return nx.mean(omega)


def hinge_gap(source_reps, target_reps, margin: float = 1.0) -> float:
    """Smallest |D - ||u-v||^2| over all pairs; distance to the hinge kink."""
    s = np.asarray(getattr(source_reps, "data", source_reps))
    t = np.asarray(getattr(target_reps, "data", target_reps))
    d = ((s[:, None, :] - t[None, :, :]) ** 2).sum(-1)
    return float(np.abs(margin - d).min())


def l2_reg(params: Iterable[Tensor]) -> Tensor:
    """Sum of squared entries."""
    total: Tensor = Tensor(0.0)
    for p in params:
        total = nx.add(total, nx.sum_(nx.mul(p, p)))
    return total


@dataclass
class LossTerms:
    sen: Tensor
    reg: Tensor
    aux: Tensor | None = None
    cfa: Tensor | None = None
    total: Tensor | None = None

    def values(self) -> dict[str, float]:
        out = {"L_sen": self.sen.item(), "L_reg": self.reg.item()}
        out["L_aux"] = self.aux.item() if self.aux is not None else 0.0
        out["L_cfa"] = self.cfa.item() if self.cfa is not None else 0.0
        if self.total is not None:
            out["L_total"] = self.total.item()
        return out


def source_loss(sen, aux, cfa, reg, lam: float = 0.1, rho: float = 1e-6):
    """L_sen^s + L_aux + lam * L_cfa + rho * L_reg^s."""
    return sen + aux + lam * cfa + rho * reg


def target_loss(sen, cfa, reg, lam: float = 0.1, rho: float = 1e-6):
    """L_sen^t + lam * L_cfa + rho * L_reg^t."""
    return sen + lam * cfa + rho * reg


def weights_of(hp: Hyperparams) -> tuple[float, float, float]:
    return hp.lam, hp.rho, hp.margin
