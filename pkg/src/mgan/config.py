"""Hyperparameter record shared by every network and trainer."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class Hyperparams:
    d_w: int = 200          # word embedding size, also the aspect representation size d_e
    d_h: int = 150          # LSTM hidden size per direction
    d_u: int = 100          # attention hidden size
    fc: int = 300
    lam: float = 0.1        # weight of the contrastive alignment loss
    rho: float = 1e-6       # weight of the l2 penalty
    margin: float = 1.0     # separation margin D
    lr: float = 1e-4
    clip_norm: float = 40.0
    batch_source: int = 64
    batch_target: int = 32
    dropout: float = 0.5
    init_scale: float = 0.01

    @property
    def d_e(self) -> int:
        return self.d_w

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparams":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def toy_hyperparams(**overrides) -> Hyperparams:
    """Small dimensions used by gradient checks and quick tests."""
    base = dict(d_w=8, d_h=6, d_u=5, fc=7)
    base.update(overrides)
    return Hyperparams(**base)
