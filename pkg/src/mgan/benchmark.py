"""Desk-scale synthetic coarse-to-fine benchmark: full transfer versus target-only."""

from __future__ import annotations

from dataclasses import dataclass, field

from .config import Hyperparams
from .corpus import SynthConfig, build_vocab, embedding_table, gen_synthetic, split
from .evaluation import c2f_localization, chance_localization, evaluate
from .numerics import Rng
from .training import TrainConfig, alternating_train, pretrain_source, train_target_only


def benchmark_hyperparams(dim: int = 32) -> Hyperparams:
    # small dimensions and a larger step size keep a five-seed run within minutes
    return Hyperparams(d_w=dim, d_h=dim, d_u=dim, fc=2 * dim, lr=1e-3)


@dataclass
class BenchmarkConfig:
    source_size: int = 5000
    source_test_size: int = 300
    target_size: int = 200
    target_test_size: int = 200
    dim: int = 32
    embedding_noise: float = 1.0
    pretrain_epochs: int = 60
    pretrain_patience: int = 10
    stage2_iterations: int = 600
    stage2_patience: int = 10
    target_epochs: int = 100
    target_patience: int = 10
    hp: Hyperparams | None = None

    def hyperparams(self) -> Hyperparams:
        return self.hp if self.hp is not None else benchmark_hyperparams(self.dim)

    def synth(self) -> SynthConfig:
        return SynthConfig(source_size=self.source_size, source_test_size=self.source_test_size,
                           target_size=self.target_size, target_test_size=self.target_test_size,
                           embedding_dim=self.dim, embedding_noise=self.embedding_noise)


@dataclass
class SeedResult:
    seed: int
    mgan_accuracy: float
    baseline_accuracy: float
    localization: float
    chance: float
    extra: dict = field(default_factory=dict)

    @property
    def improvement(self) -> float:
        return self.mgan_accuracy - self.baseline_accuracy


def prepare(cfg: BenchmarkConfig, seed: int):
    corpus = gen_synthetic(cfg.synth(), seed)
    vocab = build_vocab([corpus.source, corpus.target])
    table, _ = embedding_table(corpus.vectors, vocab, cfg.dim, Rng(seed).spawn(40))
    return corpus, vocab, table


def pretrain(cfg: BenchmarkConfig, seed: int, corpus, vocab, table):
    tc = TrainConfig(seed=seed, max_epochs=cfg.pretrain_epochs, patience=cfg.pretrain_patience)
    return pretrain_source(corpus.source, vocab, len(corpus.categories), cfg.hyperparams(), tc, embeddings=table)


def run_seed(cfg: BenchmarkConfig, seed: int) -> SeedResult:
    """One paired comparison. Both arms share the corpus, embeddings and validation split."""
    hp = cfg.hyperparams()
    corpus, vocab, table = prepare(cfg, seed)
    pre = pretrain(cfg, seed, corpus, vocab, table)
    train, val = split(corpus.target, 0.1, Rng(seed).spawn(41))

    pair = alternating_train(
        pre.network, train, corpus.source, vocab, hp,
        TrainConfig(seed=seed, max_iterations=cfg.stage2_iterations, patience=cfg.stage2_patience),
        target_val=val,
    )
    base = train_target_only(
        train, vocab, hp,
        TrainConfig(seed=seed, max_epochs=cfg.target_epochs, patience=cfg.target_patience),
        embeddings=table, val_examples=val,
    )
    return SeedResult(
        seed=seed,
        mgan_accuracy=evaluate(pair.target, corpus.target_test, vocab)["accuracy"],
        baseline_accuracy=evaluate(base.network, corpus.target_test, vocab)["accuracy"],
        localization=c2f_localization(pre.network, corpus.source_test, corpus.source_test_terms, vocab),
        chance=chance_localization(corpus.source_test),
        extra={"pretrain_epochs": pre.epochs, "stage2_iterations": pair.iterations,
               "baseline_epochs": base.epochs},
    )
