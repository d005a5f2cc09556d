"""Desk-scale acceptance criteria. Each test records one pass/fail line.

Run alone with ``pytest tests/test_acceptance.py -v``; the summary section at
the end of the run lists every criterion.
"""

import math
import time

import numpy as np
import pytest

from mgan import cli
from mgan.attention import location_matrix, position_relevance_source, position_relevance_target
from mgan.benchmark import BenchmarkConfig, run_seed
from mgan.config import Hyperparams, toy_hyperparams
from mgan.corpus import SourceExample, SynthConfig, TargetExample, Vocab, build_vocab, collate, embedding_table, gen_synthetic
from mgan.evaluation import confusion_matrix, macro_f1
from mgan.gradsuite import TOLERANCE, end_to_end_gradcheck
from mgan.losses import cfa_loss, contrastive_omega
from mgan.model import Network
from mgan.numerics import Rng, Tensor
from mgan.training import TrainConfig, load_checkpoint, save_checkpoint, train_target_only

pytestmark = pytest.mark.acceptance

BENCH_SEEDS = (0, 1, 2, 3, 4)


# 1 ---------------------------------------------------------------------------------
def test_gradient_fidelity(criterion):
    t0 = time.time()
    reports = end_to_end_gradcheck(seed=0)
    elapsed = time.time() - t0
    worst = max(r.max_rel_error for r in reports.values())
    detail = ", ".join(f"{k} max_rel={r.max_rel_error:.2e} ({r.worst_param}, skipped {r.n_skipped})"
                       for k, r in reports.items())
    ok = criterion(1, "gradient fidelity", worst < TOLERANCE and elapsed < 120, f"{detail}; {elapsed:.0f}s")
    assert ok


# 2 ---------------------------------------------------------------------------------
def _target_relevance_oracle(n, m0, m):
    # one position at a time, 1-based, term starting at I0 = m0 + 1
    I0 = m0 + 1
    return [1 - (I0 - i) / n if i < I0 else 0.0 if i <= I0 + m else 1 - (i - I0 - m) / n
            for i in range(1, n + 1)]


def test_closed_form_conformance(criterion):
    cases = mismatches = 0
    for n in range(1, 13):
        for m in range(1, n + 1):
            for m0 in range(0, n - m + 1):
                cases += 1
                got = position_relevance_target(n, m0, m).tolist()
                mismatches += got != _target_relevance_oracle(n, m0, m)
    g = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        n = int(g.integers(1, 40))
        beta = g.dirichlet(np.ones(n) * g.uniform(0.1, 3))
        explicit = np.array([[1 - abs(i - j) / n for j in range(n)] for i in range(n)]) @ beta
        worst = max(worst, float(np.max(np.abs(position_relevance_source(Tensor(beta)).data - explicit))))
        assert np.array_equal(location_matrix(n), np.array([[1 - abs(i - j) / n for j in range(n)] for i in range(n)]))
    ok = criterion(2, "closed-form conformance", mismatches == 0 and worst <= 1e-12,
                   f"target relevance {cases - mismatches}/{cases} exact; source max |p - L beta| = {worst:.1e}")
    assert ok


# 3 ---------------------------------------------------------------------------------
def test_contrastive_loss_suite(criterion):
    g = np.random.default_rng(1)
    fails = []
    for _ in range(1000):
        d = int(g.integers(1, 10))
        u, v = g.normal(0, g.uniform(0.1, 2), d), g.normal(0, g.uniform(0.1, 2), d)
        same = bool(g.integers(0, 2))
        a = contrastive_omega(Tensor(u), Tensor(v), same).item()
        b = contrastive_omega(Tensor(v), Tensor(u), same).item()
        if a != b:
            fails.append("symmetry")
        if a < 0:
            fails.append("nonnegativity")
        if contrastive_omega(Tensor(u), Tensor(u), True).item() != 0.0:
            fails.append("same label at zero distance")
        if contrastive_omega(Tensor(u), Tensor(u), False).item() != 1.0:
            fails.append("different labels at zero distance")
        bs, bt = int(g.integers(1, 6)), int(g.integers(1, 6))
        s, t = g.normal(0, 0.5, (bs, d)), g.normal(0, 0.5, (bt, d))
        ys, yt = g.integers(0, 3, bs), g.integers(0, 3, bt)
        base = cfa_loss(Tensor(s), ys, Tensor(t), yt).item()
        dup = cfa_loss(Tensor(np.vstack([s, s])), np.concatenate([ys, ys]),
                       Tensor(np.vstack([t, t, t])), np.concatenate([yt, yt, yt])).item()
        if abs(base - dup) > 1e-12:
            fails.append("duplication invariance")
    ok = criterion(3, "contrastive loss", not fails,
                   "5 properties x 1000 cases" + (f"; failures: {sorted(set(fails))}" if fails else ""))
    assert ok


# 4 ---------------------------------------------------------------------------------
def _random_example(g, kind, vocab_size):
    n = int(g.integers(1, 9))
    words = tuple(f"w{k}" for k in g.integers(0, vocab_size, n))
    sentiment = int(g.integers(0, 3))
    if kind == "source":
        m = int(g.integers(1, 4))
        return SourceExample(words, tuple(f"w{k}" for k in g.integers(0, vocab_size, m)), int(g.integers(0, 3)), sentiment)
    span = int(g.integers(1, n + 1))
    return TargetExample(words, int(g.integers(0, n - span + 1)), span, sentiment)


def test_attention_normalization(criterion):
    g = np.random.default_rng(2)
    vocab = Vocab([f"w{k}" for k in range(12)])
    sum_err = pad_err = 0.0
    for draw in range(1000):
        kind = "source" if draw % 2 == 0 else "target"
        hp = toy_hyperparams(init_scale=float(g.uniform(0.01, 1.0)))
        net = Network(kind, len(vocab), hp, Rng(draw), n_categories=3 if kind == "source" else 0)
        batch_examples = [_random_example(g, kind, 12) for _ in range(int(g.integers(1, 5)))]
        out = net.forward(collate(batch_examples, vocab))
        b = collate(batch_examples, vocab)
        dists = [(out.alpha.data, b.aspect_mask), (out.gamma.data, b.context_mask)]
        if out.beta is not None:
            dists.append((out.beta.data, b.context_mask))
        for dist, mask in dists:
            sum_err = max(sum_err, float(np.max(np.abs((dist * mask).sum(axis=1) - 1))))
        # the first example alone, without padding from its batch mates
        alone = net.forward(collate(batch_examples[:1], vocab))
        n = len(batch_examples[0].context)
        pad_err = max(pad_err, float(np.max(np.abs(alone.v_o.data[0] - out.v_o.data[0]))),
                      float(np.max(np.abs(alone.gamma.data[0, :n] - out.gamma.data[0, :n]))))
    ok = criterion(4, "attention normalization", sum_err <= 1e-12 and pad_err <= 1e-10,
                   f"max |sum - 1| = {sum_err:.1e}, max padding drift = {pad_err:.1e} over 1000 draws")
    assert ok


# 5 ---------------------------------------------------------------------------------
def test_target_only_overfits(criterion):
    # published dimensions, step size and batch size; dropout off because this
    # probes capacity and the optimizer, not generalization
    t0 = time.time()
    c = gen_synthetic(SynthConfig(source_size=100, target_size=64, embedding_dim=200), 0)
    vocab = build_vocab([c.target])
    table, _ = embedding_table(c.vectors, vocab, 200, Rng(0).spawn(40))
    hp = Hyperparams(dropout=0.0)
    assert hp.lr == 1e-4 and hp.batch_target == 32
    res = train_target_only(c.target, vocab, hp, TrainConfig(seed=0, val_fraction=0, max_epochs=200,
                                                             stop_at_train_accuracy=1.0), embeddings=table)
    elapsed = time.time() - t0
    acc = res.log.records[-1]["train_accuracy"]
    ok = criterion(5, "optimization sanity", acc == 1.0 and elapsed < 300,
                   f"train accuracy {acc:.3f} after {res.epochs} epochs; {elapsed:.0f}s")
    assert ok


# 6 and 7 share the five benchmark runs ------------------------------------------------
@pytest.fixture(scope="module")
def benchmark():
    t0 = time.time()
    results = [run_seed(BenchmarkConfig(), s) for s in BENCH_SEEDS]
    return results, time.time() - t0


def test_transfer_effect(criterion, benchmark):
    results, elapsed = benchmark
    diffs = [r.improvement for r in results]
    wins = sum(d > 0 for d in diffs)
    # one-sided sign test: P(at least `wins` wins of 5 | fair coin)
    p_sign = sum(math.comb(5, k) for k in range(wins, 6)) / 32
    mean_mgan = np.mean([r.mgan_accuracy for r in results])
    mean_base = np.mean([r.baseline_accuracy for r in results])
    ok = np.mean(diffs) > 0 and (wins == 5 or p_sign < 0.05) and elapsed < 1800
    per_seed = " ".join(f"{r.mgan_accuracy:.3f}/{r.baseline_accuracy:.3f}" for r in results)
    ok = criterion(6, "transfer effect", ok,
                   f"mean accuracy full {mean_mgan:.3f} vs target-only {mean_base:.3f}; wins {wins}/5 "
                   f"(sign p={p_sign:.3f}); per seed {per_seed}; {elapsed:.0f}s")
    assert ok


def test_c2f_localization(criterion, benchmark):
    results, _ = benchmark
    loc = float(np.mean([r.localization for r in results]))
    chance = float(np.mean([r.chance for r in results]))
    per_seed = " ".join(f"{r.localization:.3f}" for r in results)
    ok = criterion(7, "C2F localization", loc >= 0.8,
                   f"mean hit rate {loc:.3f} (need >= 0.8) vs chance {chance:.3f}; per seed {per_seed}")
    assert ok


# 8 ---------------------------------------------------------------------------------
def _brute_f1(gold, pred):
    scores = []
    for c in range(3):
        tp = sum(g == c and p == c for g, p in zip(gold, pred))
        fp = sum(g != c and p == c for g, p in zip(gold, pred))
        fn = sum(g == c and p != c for g, p in zip(gold, pred))
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        scores.append(2 * prec * rec / (prec + rec) if prec + rec else 0.0)
    return sum(scores) / 3


def test_metric_oracle(criterion):
    g = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        n = int(g.integers(1, 80))
        gold, pred = g.integers(0, 3, n).tolist(), g.integers(0, 3, n).tolist()
        worst = max(worst, abs(macro_f1(confusion_matrix(gold, pred)) - _brute_f1(gold, pred)))
    fixture = macro_f1(confusion_matrix([0, 0, 2, 1], [0, 2, 2, 1]))
    ok = criterion(8, "metric oracle", worst <= 1e-12 and abs(fixture - 7 / 9) <= 1e-12,
                   f"max deviation {worst:.1e} over 1000 matrices; fixture {fixture:.12f} vs 7/9")
    assert ok


# 9 ---------------------------------------------------------------------------------
PIPELINE_CONFIG = """\
seed = 5
out_dir = out
data.source = out/source.jsonl
data.target = out/target.jsonl
data.source_test = out/source_test.jsonl
data.source_test_manifest = out/source_test.manifest
data.target_test = out/target_test.jsonl
data.embeddings = out/embeddings.txt
synth.source_size = 400
synth.source_test_size = 50
synth.target_size = 80
synth.target_test_size = 50
synth.embedding_dim = 16
hp.d_w = 16
hp.d_h = 16
hp.d_u = 16
hp.fc = 32
hp.lr = 1e-3
train.max_epochs = 4
train.max_iterations = 40
"""


def _pipeline(capsys, root):
    root.mkdir()
    cfg = root / "run.cfg"
    cfg.write_text(PIPELINE_CONFIG)
    lines = []
    steps = (["gen-synth"], ["pretrain"], ["train", "--from", str(root / "out/pretrain.ckpt")])
    for argv in steps:
        assert cli.main([*argv, "--config", str(cfg)]) == 0
        lines += capsys.readouterr().out.splitlines()
    assert cli.main(["eval", "--checkpoint", str(root / "out/train.ckpt"),
                     "--corpus", str(root / "out/target_test.jsonl")]) == 0
    lines += capsys.readouterr().out.splitlines()
    # paths differ between the two roots; everything else must match
    return [ln for ln in lines if str(root) not in ln]


def test_reproducibility(criterion, capsys, tmp_path):
    a = _pipeline(capsys, tmp_path / "a")
    b = _pipeline(capsys, tmp_path / "b")
    metric_lines = [ln for ln in a if ln.split("=")[0] in ("accuracy", "macro_f1", "val_accuracy", "localization")]
    same_runs = a == b and len(metric_lines) >= 4

    path = tmp_path / "a/out/train.ckpt"
    ck = load_checkpoint(path)
    again = tmp_path / "again.ckpt"
    save_checkpoint(again, ck.networks, ck.vocab, ck.categories, ck.hp, extra=ck.extra)
    ck2 = load_checkpoint(again)
    bit_exact = all(ck2.networks[r].params[k].data.tobytes() == p.data.tobytes()
                    for r, net in ck.networks.items() for k, p in net.params.items())
    ok = criterion(9, "reproducibility", same_runs and bit_exact,
                   f"{len(a)} output lines identical across runs: {a == b}; checkpoint round trip bit-exact: {bit_exact}")
    assert ok
