import json

import numpy as np
import pytest

from mgan.config import toy_hyperparams
from mgan.corpus import SynthConfig, build_vocab, gen_synthetic
from mgan.evaluation import (
    EvaluationDomainError,
    accuracy,
    c2f_localization,
    chance_localization,
    confusion_matrix,
    extract_trace,
    localization_hits,
    macro_f1,
)
from mgan.model import Network
from mgan.numerics import Rng

POS, NEU, NEG = 0, 1, 2


def brute_macro_f1(gold, pred):
    """Per-class counting straight from the label lists."""
    scores = []
    for c in range(3):
        tp = sum(1 for g, p in zip(gold, pred) if g == c and p == c)
        fp = sum(1 for g, p in zip(gold, pred) if g != c and p == c)
        fn = sum(1 for g, p in zip(gold, pred) if g == c and p != c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return sum(scores) / 3


def test_accuracy_examples():
    assert accuracy(confusion_matrix([0, 1, 2, 0], [0, 1, 2, 1])) == 0.75
    assert accuracy(np.diag([3, 4, 5])) == 1.0
    assert accuracy(np.array([[0, 2, 0], [1, 0, 0], [0, 0, 0]])) == 0.0


def test_empty_confusion_is_domain_error():
    with pytest.raises(EvaluationDomainError):
        accuracy(np.zeros((3, 3), int))
    with pytest.raises(EvaluationDomainError):
        macro_f1(np.zeros((3, 3), int))


def test_macro_f1_hand_fixture():
    cm = confusion_matrix([POS, POS, NEG, NEU], [POS, NEG, NEG, NEU])
    assert abs(macro_f1(cm) - 7 / 9) < 1e-15


def test_macro_f1_perfect():
    assert macro_f1(confusion_matrix([0, 1, 2, 2], [0, 1, 2, 2])) == 1.0


def test_macro_f1_absent_class_counts_zero():
    # neutral never appears in gold or predictions: its F1 is 0 and still averaged
    assert abs(macro_f1(confusion_matrix([0, 2], [0, 2])) - 2 / 3) < 1e-15


def test_macro_f1_against_brute_force():
    g = np.random.default_rng(0)
    for _ in range(1000):
        n = int(g.integers(1, 60))
        gold, pred = g.integers(0, 3, n), g.integers(0, 3, n)
        assert abs(macro_f1(confusion_matrix(gold, pred)) - brute_macro_f1(gold, pred)) <= 1e-12


def test_metrics_permutation_invariant():
    g = np.random.default_rng(1)
    gold, pred = g.integers(0, 3, 50), g.integers(0, 3, 50)
    perm = g.permutation(50)
    a, b = confusion_matrix(gold, pred), confusion_matrix(gold[perm], pred[perm])
    assert macro_f1(a) == macro_f1(b) and accuracy(a) == accuracy(b)


# -- localization -----------------------------------------------------------------
def test_one_hot_beta_hits_everything():
    starts = [1, 0, 3]
    betas = [np.eye(5)[s] for s in starts]
    assert localization_hits(betas, starts).mean() == 1.0


def test_ties_break_to_lowest_index():
    assert localization_hits([np.array([0.5, 0.5])], [0]).tolist() == [True]
    assert localization_hits([np.array([0.5, 0.5])], [1]).tolist() == [False]


@pytest.fixture(scope="module")
def synth():
    c = gen_synthetic(SynthConfig(source_size=1000, target_size=20), 5)
    return c, build_vocab([c.source, c.target])


def test_untrained_network_near_chance(synth):
    c, v = synth
    net = Network("source", len(v), toy_hyperparams(), Rng(0), n_categories=len(c.categories))
    rate = c2f_localization(net, c.source, c.source_terms, v)
    # Monte-Carlo chance rate: a uniformly random position per sentence
    g = np.random.default_rng(0)
    lengths = np.array([len(e.context) for e in c.source])
    terms = np.array(c.source_terms)
    mc = np.mean([(g.integers(0, lengths) == terms).mean() for _ in range(200)])
    assert abs(mc - chance_localization(c.source)) < 0.01
    assert abs(rate - mc) <= 0.1


def test_localization_errors(synth):
    c, v = synth
    net = Network("source", len(v), toy_hyperparams(), Rng(0), n_categories=len(c.categories))
    with pytest.raises(EvaluationDomainError):
        c2f_localization(net, [], [], v)
    with pytest.raises(EvaluationDomainError):
        c2f_localization(net, c.source[:10], c.source_terms[:9], v)


# -- traces ---------------------------------------------------------------------------
def test_source_trace(synth):
    c, v = synth
    net = Network("source", len(v), toy_hyperparams(init_scale=0.3), Rng(2), n_categories=len(c.categories))
    ex = c.source[3]
    tr = extract_trace(net, ex, v)
    n = len(ex.context)
    assert len(tr.gamma) == n and len(tr.beta) == n and len(tr.p) == n
    assert tr.M.shape == (n, len(ex.aspect_words))
    for dist in (tr.alpha, tr.beta, tr.gamma):
        assert abs(dist.sum() - 1) <= 1e-10
    rec = json.loads(tr.to_json())
    assert rec["tokens"] == list(ex.context) and "span" not in rec


def test_target_trace_has_no_beta(synth):
    c, v = synth
    net = Network("target", len(v), toy_hyperparams(), Rng(2))
    ex = c.target[0]
    tr = extract_trace(net, ex, v)
    assert tr.beta is None
    rec = tr.to_record()
    assert "beta" not in rec
    assert rec["span"] == [ex.span_start, ex.span_len]
    assert len(rec["gamma"]) == len(ex.context)
