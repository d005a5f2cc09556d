"""Seeded gradient-check suites on toy dimensions, shared by the CLI and the tests.

The end-to-end suite checks the full source and target objectives, CFA term
included, against central differences. Hinge-boundary points are excluded:
an entry is skipped when one of its perturbed evaluations puts some
different-label pair within ``HINGE_EXCLUSION`` of the margin.
"""

from __future__ import annotations

import numpy as np

from . import numerics as nx
from .attention import c2a, c2f, init_c2a_params, init_c2f_params, init_pas_params, pas, position_relevance_source
from .config import Hyperparams, toy_hyperparams
from .corpus import SourceExample, TargetExample, Vocab, collate
from .encoder import bilstm, embed, init_encoder_params
from .losses import cfa_loss, hinge_gap, init_classifier_params, sentiment_logits
from .model import Network, target_from_source
from .numerics import GradCheckReport, Rng, Tensor, grad_check, no_grad
from .training.loop import source_terms, target_terms

TOLERANCE = 1e-5
HINGE_EXCLUSION = 1e-6

# three categories, sentences of at most seven tokens
TOY_SOURCE = [
    SourceExample(("the", "salmon", "was", "great"), ("food",), 0, 0),
    SourceExample(("slow", "waiter", "but", "fine", "tuna", "and", "rice"), ("service", "staff"), 1, 2),
    SourceExample(("prices", "are", "ok"), ("price",), 2, 1),
]
TOY_TARGET = [
    TargetExample(("the", "sushi", "roll", "was", "bad"), 1, 2, 2),
    TargetExample(("nice", "host"), 1, 1, 0),
]


def toy_setup(seed: int = 0, init_scale: float = 0.5):
    """Vocabulary, hyperparameters and a source/target pair with large random weights."""
    tokens = sorted({w for ex in TOY_SOURCE + TOY_TARGET for w in ex.context + tuple(ex.aspect_words)})
    vocab = Vocab(tokens)
    hp = toy_hyperparams(init_scale=init_scale)
    rng = Rng(seed)
    g_s = Network("source", len(vocab), hp, rng.spawn(1), n_categories=3)
    g_t = target_from_source(g_s, rng.spawn(2))
    # break the shared initialization so the two networks differ
    for p in g_t.params.values():
        p.data = p.data + rng.spawn(3).uniform(-0.1, 0.1, p.shape)
    return vocab, hp, g_s, g_t


def _end_to_end(role: str, seed: int, init_scale: float, epsilon: float) -> GradCheckReport:
    vocab, hp, g_s, g_t = toy_setup(seed, init_scale)
    sb, tb = collate(TOY_SOURCE, vocab), collate(TOY_TARGET, vocab)
    stepped, other = (g_s, g_t) if role == "L_src" else (g_t, g_s)
    other_batch = tb if role == "L_src" else sb
    with no_grad():
        other_reps = other.forward(other_batch).v_o

    def loss():
        out = stepped.forward(sb if role == "L_src" else tb)
        if role == "L_src":
            return source_terms(g_s, out, sb, hp, other=(other_reps, tb.sentiment)).total
        return target_terms(g_t, out, tb, hp, other=(other_reps, sb.sentiment)).total

    def near_hinge() -> bool:
        with no_grad():
            reps = stepped.forward(sb if role == "L_src" else tb).v_o
        s, t = (reps, other_reps) if role == "L_src" else (other_reps, reps)
        return hinge_gap(s, t, hp.margin) < HINGE_EXCLUSION

    return grad_check(loss, stepped.params, epsilon=epsilon, skip=near_hinge, extended=True)


def end_to_end_gradcheck(seed: int = 0, init_scale: float = 0.5, epsilon: float = 1e-4) -> dict[str, GradCheckReport]:
    """Reports for L_src (source parameters) and L_tar (target parameters)."""
    return {role: _end_to_end(role, seed, init_scale, epsilon) for role in ("L_src", "L_tar")}


def module_gradchecks(seed: int = 0, epsilon: float = 1e-4) -> dict[str, GradCheckReport]:
    """Encoder, attention stack, classifier and CFA checked one module at a time."""
    hp: Hyperparams = toy_hyperparams(init_scale=0.5)
    g = np.random.default_rng(seed)
    rng = Rng(seed)
    ids = np.array([[2, 3, 4, 5, 6], [7, 8, 9, 0, 0]])
    mask = ids != 0
    reports = {}

    enc = init_encoder_params(10, hp, rng.spawn(1))
    w = g.normal(size=(2, 5, 2 * hp.d_h))
    reports["encoder"] = grad_check(
        lambda: nx.sum_(nx.mul(bilstm(embed(enc["embedding"], ids), mask, enc), w)), enc, epsilon)

    att = {**init_c2a_params(hp, rng.spawn(2)), **init_c2f_params(hp, 3, rng.spawn(3)), **init_pas_params(hp, rng.spawn(4))}
    h = Tensor(g.normal(size=(2, 5, 2 * hp.d_h)), requires_grad=True)
    e = Tensor(g.normal(size=(2, 2, hp.d_w)), requires_grad=True)
    asp = np.array([[True, True], [True, False]])
    readout = g.normal(size=(2, 2 * hp.d_h))

    def attention():
        a = c2a(h, e, mask, asp, att)
        f = c2f(h, a.h_a, mask, att)
        o = pas(h, f.r_a, position_relevance_source(f.beta, mask.sum(axis=1)), mask, att)
        return nx.add(nx.sum_(nx.mul(o.v_o, readout)), nx.sum_(nx.mul(f.aux_logits, np.arange(3.0))))

    reports["attention"] = grad_check(attention, {**att, "h": h, "e": e}, epsilon)

    clf = init_classifier_params(hp, rng.spawn(5))
    v = Tensor(g.normal(size=(4, 2 * hp.d_h)), requires_grad=True)
    reports["classifier"] = grad_check(
        lambda: nx.cross_entropy(sentiment_logits(v, clf), [0, 2, 1, 2]), {**clf, "v_o": v}, epsilon)

    s = Tensor(g.normal(0, 0.3, (3, 4)), requires_grad=True)
    t = Tensor(g.normal(0, 0.3, (2, 4)), requires_grad=True)
    ys, yt = [0, 1, 2], [1, 2]
    reports["cfa"] = grad_check(
        lambda: cfa_loss(s, ys, t, yt), {"source_reps": s, "target_reps": t}, epsilon,
        skip=lambda: hinge_gap(s, t) < HINGE_EXCLUSION)
    return reports
