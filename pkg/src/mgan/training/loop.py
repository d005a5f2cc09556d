"""Stage-1 source pretraining, stage-2 alternating training, and the target-only baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .. import losses as L
from ..config import Hyperparams
from ..corpus import Batch, Example, SourceExample, TargetExample, Vocab, make_batches, split
from ..evaluation import evaluate
from ..model import ForwardOutput, Network, target_from_source
from ..numerics import Rng, Tensor, cross_entropy, no_grad
from .optim import Adam, clip_gradients

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    seed: int = 0
    val_fraction: float = 0.1
    patience: int = 10
    max_epochs: int = 200
    max_iterations: int = 3000
    eval_every: int = 0                 # stage-2 iterations per evaluation; 0 means one target epoch
    cfa_gradient_isolation: bool = True
    literal_eq9: bool = True
    stop_at_train_accuracy: float | None = None


LOG_KEYS = ("step", "epoch", "L_sen", "L_aux", "L_cfa", "L_reg", "val_accuracy", "val_macro_f1")


@dataclass
class TrainLog:
    records: list[dict] = field(default_factory=list)

    def add(self, **rec) -> None:
        self.records.append(rec)
        log.info(format_record(rec))

    def to_text(self) -> str:
        return "".join(format_record(r) + "\n" for r in self.records)


def format_record(rec: dict) -> str:
    keys = [k for k in LOG_KEYS if k in rec] + sorted(k for k in rec if k not in LOG_KEYS)
    parts = []
    for k in keys:
        v = rec[k]
        parts.append(f"{k}={v:.10g}" if isinstance(v, float) else f"{k}={v}")
    return " ".join(parts)


@dataclass
class TrainResult:
    network: Network
    log: TrainLog
    best_val_accuracy: float | None
    epochs: int
    optimizer: Adam | None = None


@dataclass
class PairResult:
    source: Network
    target: Network
    log: TrainLog
    best_val_accuracy: float
    iterations: int
    source_optimizer: Adam | None = None
    target_optimizer: Adam | None = None


class EarlyStopping:
    """Tracks the best validation score; stops after ``patience`` evaluations without improvement."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = -np.inf
        self.bad = 0
        self.snapshot = None

    def update(self, score: float, snapshot) -> bool:
        if score > self.best:
            self.best = score
            self.bad = 0
            self.snapshot = snapshot()
        else:
            self.bad += 1
        return self.bad >= self.patience


def batch_stream(examples: Sequence[Example], batch_size: int, vocab: Vocab, rng: Rng) -> Iterator[Batch]:
    """Endless shuffled batches, reshuffling at every epoch boundary."""
    while True:
        yield from make_batches(examples, batch_size, vocab, rng, shuffle=True)


# -- losses on one batch -----------------------------------------------------
def source_terms(net: Network, out: ForwardOutput, batch: Batch, hp: Hyperparams,
                 other: tuple[Tensor, np.ndarray] | None = None) -> L.LossTerms:
    """L_src for a source batch; ``other`` = (target reps, target labels) adds the CFA term."""
    sen = cross_entropy(out.logits, batch.sentiment)
    aux = cross_entropy(out.aux_logits, batch.category_id)
    reg = L.l2_reg(net.params.regularized())
    if other is None:
        cfa = None
        total = sen + aux + hp.rho * reg
    else:
        cfa = L.cfa_loss(out.v_o, batch.sentiment, other[0], other[1], hp.margin)
        total = L.source_loss(sen, aux, cfa, reg, hp.lam, hp.rho)
    return L.LossTerms(sen=sen, reg=reg, aux=aux, cfa=cfa, total=total)


def target_terms(net: Network, out: ForwardOutput, batch: Batch, hp: Hyperparams,
                 other: tuple[Tensor, np.ndarray] | None = None) -> L.LossTerms:
    """L_tar for a target batch; ``other`` = (source reps, source labels) adds the CFA term."""
    sen = cross_entropy(out.logits, batch.sentiment)
    reg = L.l2_reg(net.params.regularized())
    if other is None:
        cfa = None
        total = sen + hp.rho * reg
    else:
        cfa = L.cfa_loss(other[0], other[1], out.v_o, batch.sentiment, hp.margin)
        total = L.target_loss(sen, cfa, reg, hp.lam, hp.rho)
    return L.LossTerms(sen=sen, reg=reg, cfa=cfa, total=total)


def apply_step(loss: Tensor, stepped: Sequence[tuple[Network, Adam]], hp: Hyperparams) -> list[float]:
    """Backprop ``loss``, clip each stepped network's gradients, and take an Adam step."""
    for net, _ in stepped:
        net.params.zero_grad()
    loss.backward()
    norms = []
    for net, opt in stepped:
        grads, norm = clip_gradients(net.params.grads(), hp.clip_norm)
        opt.step(grads)
        norms.append(norm)
    return norms


def _other_reps(net: Network, batch: Batch, isolate: bool, rng: Rng) -> Tensor:
    if isolate:
        with no_grad():
            return net.forward(batch, train=True, rng=rng).v_o
    return net.forward(batch, train=True, rng=rng).v_o


def source_step(g_s: Network, g_t: Network, opt_s: Adam, opt_t: Adam, sb: Batch, tb: Batch,
                hp: Hyperparams, isolate: bool, rng: Rng) -> L.LossTerms:
    """One L_src step. Under isolation the target representations are constants."""
    out_s = g_s.forward(sb, train=True, rng=rng)
    reps_t = _other_reps(g_t, tb, isolate, rng)
    terms = source_terms(g_s, out_s, sb, hp, other=(reps_t, tb.sentiment))
    apply_step(terms.total, [(g_s, opt_s)] if isolate else [(g_s, opt_s), (g_t, opt_t)], hp)
    return terms


def target_step(g_s: Network, g_t: Network, opt_s: Adam, opt_t: Adam, sb: Batch, tb: Batch,
                hp: Hyperparams, isolate: bool, rng: Rng) -> L.LossTerms:
    """One L_tar step. Under isolation the source representations are constants."""
    out_t = g_t.forward(tb, train=True, rng=rng)
    reps_s = _other_reps(g_s, sb, isolate, rng)
    terms = target_terms(g_t, out_t, tb, hp, other=(reps_s, sb.sentiment))
    apply_step(terms.total, [(g_t, opt_t)] if isolate else [(g_t, opt_t), (g_s, opt_s)], hp)
    return terms


def _mean_terms(acc: dict[str, list[float]]) -> dict[str, float]:
    return {k: float(np.mean(v)) for k, v in acc.items()}


def _accumulate(acc: dict[str, list[float]], terms: L.LossTerms) -> None:
    for k, v in terms.values().items():
        acc.setdefault(k, []).append(v)


def _train_accuracy(net: Network, examples, vocab) -> float:
    return evaluate(net, examples, vocab)["accuracy"]


# -- stage 1 -------------------------------------------------------------------
def pretrain_source(
    examples: Sequence[SourceExample],
    vocab: Vocab,
    n_categories: int,
    hp: Hyperparams,
    cfg: TrainConfig,
    embeddings: np.ndarray | None = None,
    val_examples: Sequence[SourceExample] | None = None,
) -> TrainResult:
    """Train the source network alone on L_sen + L_aux + rho * L_reg with early stopping."""
    if not examples:
        raise ConfigError("source corpus is empty")
    rng = Rng(cfg.seed)
    train = list(examples)
    val = list(val_examples) if val_examples is not None else []
    if val_examples is None and cfg.val_fraction > 0:
        train, val = split(train, cfg.val_fraction, rng.spawn(10))
    net = Network("source", len(vocab), hp, rng.spawn(11), n_categories, embeddings, cfg.literal_eq9)
    opt = Adam(net.params, hp.lr)
    batch_rng, drop_rng = rng.spawn(12), rng.spawn(13)
    stopper = EarlyStopping(cfg.patience)
    history = TrainLog()
    step = 0
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        acc: dict[str, list[float]] = {}
        for batch in make_batches(train, hp.batch_source, vocab, batch_rng):
            out = net.forward(batch, train=True, rng=drop_rng)
            terms = source_terms(net, out, batch, hp)
            apply_step(terms.total, [(net, opt)], hp)
            _accumulate(acc, terms)
            step += 1
        rec = dict(step=step, epoch=epoch, **_mean_terms(acc))
        stop = False
        if val:
            metrics = evaluate(net, val, vocab)
            rec.update(val_accuracy=metrics["accuracy"], val_macro_f1=metrics["macro_f1"])
            stop = stopper.update(metrics["accuracy"], net.params.arrays)
        if cfg.stop_at_train_accuracy is not None:
            rec["train_accuracy"] = _train_accuracy(net, train, vocab)
            stop = stop or rec["train_accuracy"] >= cfg.stop_at_train_accuracy
        history.add(**rec)
        if stop:
            break
    if stopper.snapshot is not None:
        net.params.load_arrays(stopper.snapshot)
    best = stopper.best if val else None
    return TrainResult(net, history, best, epoch, opt)


# -- target-only baseline ----------------------------------------------------------
def train_target_only(
    examples: Sequence[TargetExample],
    vocab: Vocab,
    hp: Hyperparams,
    cfg: TrainConfig,
    embeddings: np.ndarray | None = None,
    val_examples: Sequence[TargetExample] | None = None,
    init: Network | None = None,
) -> TrainResult:
    """Train a target network on L_sen^t + rho * L_reg^t only (no transfer)."""
    if not examples:
        raise ConfigError("target corpus is empty")
    rng = Rng(cfg.seed)
    train = list(examples)
    val = list(val_examples) if val_examples is not None else []
    if val_examples is None and cfg.val_fraction > 0:
        train, val = split(train, cfg.val_fraction, rng.spawn(20))
    net = init if init is not None else Network("target", len(vocab), hp, rng.spawn(21),
                                                embeddings=embeddings, literal_eq9=cfg.literal_eq9)
    opt = Adam(net.params, hp.lr)
    batch_rng, drop_rng = rng.spawn(22), rng.spawn(23)
    stopper = EarlyStopping(cfg.patience)
    history = TrainLog()
    step = 0
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        acc: dict[str, list[float]] = {}
        for batch in make_batches(train, hp.batch_target, vocab, batch_rng):
            out = net.forward(batch, train=True, rng=drop_rng)
            terms = target_terms(net, out, batch, hp)
            apply_step(terms.total, [(net, opt)], hp)
            _accumulate(acc, terms)
            step += 1
        rec = dict(step=step, epoch=epoch, **_mean_terms(acc))
        stop = False
        if val:
            metrics = evaluate(net, val, vocab)
            rec.update(val_accuracy=metrics["accuracy"], val_macro_f1=metrics["macro_f1"])
            stop = stopper.update(metrics["accuracy"], net.params.arrays)
        if cfg.stop_at_train_accuracy is not None:
            rec["train_accuracy"] = _train_accuracy(net, train, vocab)
            stop = stop or rec["train_accuracy"] >= cfg.stop_at_train_accuracy
        history.add(**rec)
        if stop:
            break
    if stopper.snapshot is not None:
        net.params.load_arrays(stopper.snapshot)
    best = stopper.best if val else None
    return TrainResult(net, history, best, epoch, opt)


# -- stage 2 -------------------------------------------------------------------
def alternating_train(
    pretrained: Network,
    target_examples: Sequence[TargetExample],
    source_examples: Sequence[SourceExample],
    vocab: Vocab,
    hp: Hyperparams,
    cfg: TrainConfig,
    target_val: Sequence[TargetExample] | None = None,
) -> PairResult:
    """Alternate one L_src step on the source network with one L_tar step on the target network.

    The target network's encoder, C2A and PaS start as copies of the pretrained
    source network. With gradient isolation, each step treats the other
    network's representations as constants; otherwise the CFA gradient also
    steps the other network.
    """
    if pretrained is None or not pretrained.has_c2f:
        raise ConfigError("alternating training needs a pretrained source network")
    if not target_examples or not source_examples:
        raise ConfigError("alternating training needs nonempty source and target corpora")
    rng = Rng(cfg.seed)
    train = list(target_examples)
    val = list(target_val) if target_val is not None else []
    if target_val is None and cfg.val_fraction > 0:
        train, val = split(train, cfg.val_fraction, rng.spawn(30))
    g_s = pretrained.copy()
    g_t = target_from_source(g_s, rng.spawn(31), cfg.literal_eq9)
    opt_s, opt_t = Adam(g_s.params, hp.lr), Adam(g_t.params, hp.lr)
    src_stream = batch_stream(source_examples, hp.batch_source, vocab, rng.spawn(32))
    tgt_stream = batch_stream(train, hp.batch_target, vocab, rng.spawn(33))
    drop_rng = rng.spawn(34)
    eval_every = cfg.eval_every or max(1, -(-len(train) // hp.batch_target))
    isolate = cfg.cfa_gradient_isolation

    stopper = EarlyStopping(cfg.patience)
    history = TrainLog()
    acc: dict[str, list[float]] = {}
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        terms_s = source_step(g_s, g_t, opt_s, opt_t, next(src_stream), next(tgt_stream), hp, isolate, drop_rng)
        # the target step draws fresh batches
        terms_t = target_step(g_s, g_t, opt_s, opt_t, next(src_stream), next(tgt_stream), hp, isolate, drop_rng)

        for k, v in terms_s.values().items():
            acc.setdefault("src_" + k, []).append(v)
        for k, v in terms_t.values().items():
            acc.setdefault(k, []).append(v)

        if it % eval_every == 0:
            means = _mean_terms(acc)
            acc = {}
            rec = {k: means[k] for k in ("L_sen", "L_aux", "L_cfa", "L_reg") if k in means}
            rec["L_aux"] = means.get("src_L_aux", 0.0)
            rec.update(step=it, epoch=it // eval_every)
            rec["src_L_sen"] = means["src_L_sen"]
            stop = False
            if val:
                metrics = evaluate(g_t, val, vocab)
                rec.update(val_accuracy=metrics["accuracy"], val_macro_f1=metrics["macro_f1"])
                stop = stopper.update(
                    metrics["accuracy"], lambda: (g_s.params.arrays(), g_t.params.arrays())
                )
            if cfg.stop_at_train_accuracy is not None:
                rec["train_accuracy"] = _train_accuracy(g_t, train, vocab)
                stop = stop or rec["train_accuracy"] >= cfg.stop_at_train_accuracy
            history.add(**rec)
            if stop:
                break
    if stopper.snapshot is not None:
        g_s.params.load_arrays(stopper.snapshot[0])
        g_t.params.load_arrays(stopper.snapshot[1])
    best = stopper.best if val else float("nan")
    return PairResult(g_s, g_t, history, best, it, opt_s, opt_t)
