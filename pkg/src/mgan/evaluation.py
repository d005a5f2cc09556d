"""Accuracy, macro-F1, C2F localization and attention traces."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import SENTIMENTS, Example, SourceExample, TargetExample, Vocab, collate
from .numerics import Tensor, no_grad, softmax

N_CLASSES = 3


class EvaluationDomainError(ValueError):
    pass


def confusion_matrix(gold: Sequence[int], pred: Sequence[int], n_classes: int = N_CLASSES) -> np.ndarray:
    """Rows are gold classes, columns predicted classes."""
    gold = np.asarray(gold, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if gold.shape != pred.shape:
        raise ValueError(f"{gold.size} gold labels but {pred.size} predictions")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (gold, pred), 1)
    return cm


def accuracy(confusion: np.ndarray) -> float:
    total = confusion.sum()
    if total <= 0:
        raise EvaluationDomainError("accuracy of an empty confusion matrix")
    return float(np.trace(confusion) / total)


def macro_f1(confusion: np.ndarray) -> float:
    """Unweighted mean of per-class F1 over every class; 0/0 terms count as 0."""
    confusion = np.asarray(confusion)
    if confusion.sum() <= 0:
        raise EvaluationDomainError("macro-F1 of an empty confusion matrix")
    tp = np.diag(confusion).astype(np.float64)
    predicted = confusion.sum(axis=0)
    actual = confusion.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return float(f1.mean())


# -- model-driven evaluation -----------------------------------------------
def predict(network, examples: Sequence[Example], vocab: Vocab, batch_size: int = 64):
    """Frozen-parameter predictions; returns (labels, probabilities)."""
    labels, probs = [], []
    with no_grad():
        for lo in range(0, len(examples), batch_size):
            batch = collate(examples[lo:lo + batch_size], vocab)
            logits = network.forward(batch, train=False).logits.data
            pr = softmax(logits, axis=1)
            probs.append(pr)
            labels.append(pr.argmax(axis=1))
    if not labels:
        return np.zeros(0, dtype=np.int64), np.zeros((0, N_CLASSES))
    return np.concatenate(labels), np.concatenate(probs)


def evaluate(network, examples: Sequence[Example], vocab: Vocab, batch_size: int = 64) -> dict[str, float]:
    pred, _ = predict(network, examples, vocab, batch_size)
    cm = confusion_matrix([ex.sentiment for ex in examples], pred)
    return {"accuracy": accuracy(cm), "macro_f1": macro_f1(cm), "n": int(cm.sum())}


def localization_hits(betas: Sequence[np.ndarray], starts: Sequence[int], span_lens: Sequence[int] | None = None) -> np.ndarray:
    """Per sentence: does argmax beta (lowest index on ties) fall in the planted span?"""
    if span_lens is None:
        span_lens = [1] * len(starts)
    hits = []
    for beta, s, m in zip(betas, starts, span_lens):
        j = int(np.argmax(beta))  # argmax returns the first maximum
        hits.append(s <= j < s + m)
    return np.array(hits, dtype=bool)


def source_betas(network, examples: Sequence[SourceExample], vocab: Vocab, batch_size: int = 64) -> list[np.ndarray]:
    out = []
    with no_grad():
        for lo in range(0, len(examples), batch_size):
            chunk = examples[lo:lo + batch_size]
            batch = collate(chunk, vocab)
            beta = network.forward(batch, train=False).beta.data
            out.extend(beta[k, :len(ex.context)].copy() for k, ex in enumerate(chunk))
    return out


def c2f_localization(network, examples: Sequence[SourceExample], manifest: Sequence[int], vocab: Vocab) -> float:
    """Fraction of sentences whose C2F attention peaks on the planted term."""
    if not network.has_c2f:
        raise ValueError("C2F localization needs a source network")
    if len(examples) == 0:
        raise EvaluationDomainError("C2F localization of an empty corpus")
    if len(manifest) != len(examples):
        raise EvaluationDomainError(f"manifest has {len(manifest)} entries for {len(examples)} sentences")
    betas = source_betas(network, examples, vocab)
    return float(localization_hits(betas, manifest).mean())


def chance_localization(examples: Sequence[Example], span_len: int = 1) -> float:
    """Hit rate of a uniformly random position: mean(span_len / n)."""
    return float(np.mean([span_len / len(ex.context) for ex in examples]))


# -- traces ------------------------------------------------------------------
@dataclass
class AttentionTrace:
    tokens: list[str]
    alpha: np.ndarray
    gamma: np.ndarray
    p: np.ndarray
    M: np.ndarray
    prediction: int
    probabilities: np.ndarray
    gold: int
    beta: np.ndarray | None = None
    span: tuple[int, int] | None = None
    aspect: list[str] | None = None

    def to_record(self) -> dict:
        rec = {
            "tokens": self.tokens,
            "aspect": self.aspect,
            "alpha": self.alpha.tolist(),
            "gamma": self.gamma.tolist(),
            "p": self.p.tolist(),
            "M": self.M.tolist(),
            "prediction": SENTIMENTS[self.prediction],
            "gold": SENTIMENTS[self.gold],
            "probabilities": self.probabilities.tolist(),
        }
        if self.beta is not None:
            rec["beta"] = self.beta.tolist()
        if self.span is not None:
            rec["span"] = list(self.span)
        return rec

    def to_json(self) -> str:
        return json.dumps(self.to_record())


def extract_trace(network, example: Example, vocab: Vocab) -> AttentionTrace:
    """Every attention distribution of one example, re-checked to sum to 1."""
    batch = collate([example], vocab)
    n, m = len(example.context), len(example.aspect_words)
    with no_grad():
        out = network.forward(batch, train=False)
    probs = softmax(out.logits.data, axis=1)[0]
    p = out.p.data if isinstance(out.p, Tensor) else np.asarray(out.p)
    trace = AttentionTrace(
        tokens=list(example.context),
        aspect=list(example.aspect_words),
        alpha=out.alpha.data[0, :m].copy(),
        gamma=out.gamma.data[0, :n].copy(),
        p=p[0, :n].copy(),
        M=out.M.data[0, :n, :m].copy(),
        prediction=int(probs.argmax()),
        probabilities=probs,
        gold=example.sentiment,
        beta=out.beta.data[0, :n].copy() if out.beta is not None else None,
        span=(example.span_start, example.span_len) if isinstance(example, TargetExample) else None,
    )
    for name in ("alpha", "gamma", "beta"):
        dist = getattr(trace, name)
        if dist is not None and abs(dist.sum() - 1.0) > 1e-10:
            raise AssertionError(f"{name} sums to {dist.sum()!r}")
    return trace
