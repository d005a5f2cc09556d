"""Seeded coarse-to-fine benchmark generator.

Source sentences mention a concrete term drawn from one category's lexicon and
carry only the category (its aspect words and id) as the aspect; the planted
term position is returned separately as a manifest. Target sentences use
different term surface forms and carry the exact term span. Both domains share
the sentiment cue lexicons, so sentiment knowledge learned on the source is
reusable on the target.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..numerics import Rng
from .data import SourceExample, TargetExample, atomic_write_text, write_corpus, write_manifest


class SynthConfigError(ValueError):
    pass


# T/C = term/cue slots; multi-aspect templates use T1/C1 and T2/C2
SINGLE_TEMPLATES = (
    "the T was C",
    "honestly the T is C",
    "C T here",
    "we found the T quite C",
    "i think the T was really C",
    "overall a C T",
    "the T , C as usual",
)
MULTI_TEMPLATES = (
    "the T1 was C1 but the T2 was C2",
    "C1 T1 and C2 T2",
    "the T1 is C1 , the T2 however is C2",
    "we found the T1 C1 while the T2 seemed C2",
)


@dataclass
class SynthConfig:
    n_categories: int = 4
    aspect_words_per_category: int = 2
    source_terms_per_category: int = 6
    target_terms_per_category: int = 6
    cues_per_polarity: int = 30
    multi_aspect_fraction: float = 0.5
    target_multiword_fraction: float = 0.3
    source_size: int = 1000
    source_test_size: int = 0
    target_size: int = 200
    target_test_size: int = 0
    # GloVe-style vectors for the synthetic vocabulary; 0 disables them
    embedding_dim: int = 200
    embedding_noise: float = 0.5
    # explicit per-category source term lexicons; generated when empty
    source_lexicons: list[list[str]] = field(default_factory=list)

    def validate(self) -> None:
        if self.n_categories < 2:
            raise SynthConfigError("n_categories must be >= 2")
        for key in ("aspect_words_per_category", "source_terms_per_category",
                    "target_terms_per_category", "cues_per_polarity"):
            if getattr(self, key) < 1:
                raise SynthConfigError(f"{key} must be >= 1")
        if self.embedding_dim < 0 or self.embedding_noise < 0:
            raise SynthConfigError("embedding_dim and embedding_noise must be >= 0")
        for key in ("multi_aspect_fraction", "target_multiword_fraction"):
            if not 0.0 <= getattr(self, key) <= 1.0:
                raise SynthConfigError(f"{key} must lie in [0, 1]")
        if self.source_lexicons:
            if len(self.source_lexicons) != self.n_categories:
                raise SynthConfigError("source_lexicons needs one lexicon per category")
            seen: dict[str, int] = {}
            for k, lex in enumerate(self.source_lexicons):
                if not lex:
                    raise SynthConfigError(f"source lexicon of category {k} is empty")
                for term in lex:
                    if term in seen and seen[term] != k:
                        raise SynthConfigError(
                            f"term {term!r} appears in the lexicons of categories {seen[term]} and {k}"
                        )
                    seen[term] = k


@dataclass
class SyntheticCorpus:
    categories: list[str]
    source: list[SourceExample]
    source_terms: list[int]
    target: list[TargetExample]
    source_test: list[SourceExample] = field(default_factory=list)
    source_test_terms: list[int] = field(default_factory=list)
    target_test: list[TargetExample] = field(default_factory=list)
    vectors: dict[str, np.ndarray] = field(default_factory=dict)

    def write(self, out_dir) -> dict[str, Path]:
        out = Path(out_dir)
        paths = {
            "source": out / "source.jsonl",
            "source_manifest": out / "source.manifest",
            "target": out / "target.jsonl",
        }
        write_corpus(paths["source"], self.source, "source", self.categories)
        write_manifest(paths["source_manifest"], self.source_terms)
        write_corpus(paths["target"], self.target, "target")
        if self.source_test:
            paths["source_test"] = out / "source_test.jsonl"
            paths["source_test_manifest"] = out / "source_test.manifest"
            write_corpus(paths["source_test"], self.source_test, "source", self.categories)
            write_manifest(paths["source_test_manifest"], self.source_test_terms)
        if self.target_test:
            paths["target_test"] = out / "target_test.jsonl"
            write_corpus(paths["target_test"], self.target_test, "target")
        if self.vectors:
            paths["embeddings"] = out / "embeddings.txt"
            write_embeddings(paths["embeddings"], self.vectors)
        return paths


class _Lexicon:
    def __init__(self, cfg: SynthConfig):
        K = cfg.n_categories
        self.categories = [f"cat{k}" for k in range(K)]
        self.aspect_words = [
            [f"cat{k}"] + [f"cat{k}w{j}" for j in range(1, cfg.aspect_words_per_category)]
            for k in range(K)
        ]
        if cfg.source_lexicons:
            self.source_terms = [list(lex) for lex in cfg.source_lexicons]
        else:
            self.source_terms = [[f"s{k}t{j}" for j in range(cfg.source_terms_per_category)] for k in range(K)]
        self.target_terms = [[f"t{k}t{j}" for j in range(cfg.target_terms_per_category)] for k in range(K)]
        self.modifiers = [f"mod{j}" for j in range(4)]
        self.cues = [[f"{tag}{j}" for j in range(cfg.cues_per_polarity)] for tag in ("pos", "neu", "neg")]


def _template_words() -> list[str]:
    slots = {"T", "C", "T1", "C1", "T2", "C2"}
    return sorted({w for t in SINGLE_TEMPLATES + MULTI_TEMPLATES for w in t.split() if w not in slots})


def synthetic_vectors(cfg: SynthConfig, lex: "_Lexicon", rng: Rng) -> dict[str, np.ndarray]:
    """Stand-in for pretrained vectors: every term and aspect word of a category
    lies near that category's direction, every cue near its polarity's direction,
    and the remaining words are pure noise. Values are rounded to 6 decimals so
    the written file reproduces them exactly."""
    d = cfg.embedding_dim
    unit = lambda v: v / np.linalg.norm(v)  # noqa: E731
    cat_dirs = [unit(rng.standard_normal(d)) for _ in range(cfg.n_categories)]
    pol_dirs = [unit(rng.standard_normal(d)) for _ in range(3)]
    bases: dict[str, np.ndarray] = {}
    for k in range(cfg.n_categories):
        for w in lex.aspect_words[k] + lex.source_terms[k] + lex.target_terms[k]:
            bases[w] = cat_dirs[k]
    for s, cues in enumerate(lex.cues):
        for w in cues:
            bases[w] = pol_dirs[s]
    for w in lex.modifiers + _template_words():
        bases.setdefault(w, np.zeros(d))
    scale = cfg.embedding_noise / np.sqrt(d)
    return {w: np.round(bases[w] + scale * rng.standard_normal(d), 6) for w in sorted(bases)}


def write_embeddings(path, vectors: dict[str, np.ndarray]) -> None:
    lines = [w + " " + " ".join(f"{x:.6f}" for x in v) for w, v in vectors.items()]
    atomic_write_text(path, "\n".join(lines) + "\n")


def _fill(template: str, slots: dict[str, list[str]]) -> tuple[list[str], dict[str, tuple[int, int]]]:
    tokens: list[str] = []
    spans: dict[str, tuple[int, int]] = {}
    for word in template.split():
        if word in slots:
            spans[word] = (len(tokens), len(slots[word]))
            tokens.extend(slots[word])
        else:
            tokens.append(word)
    return tokens, spans


def _sentence(rng: Rng, cfg: SynthConfig, term_pool, lex: _Lexicon, multiword: float):
    """Draw (tokens, (start, len) of the labelled term, category, sentiment)."""
    K = cfg.n_categories
    cat = int(rng.integers(0, K))
    sent = int(rng.integers(0, 3))

    def term(k):
        pool = term_pool[k]
        words = [pool[int(rng.integers(0, len(pool)))]]
        if multiword and rng.random() < multiword:
            words.insert(0, lex.modifiers[int(rng.integers(0, len(lex.modifiers)))])
        return words

    def cue(s):
        return [lex.cues[s][int(rng.integers(0, cfg.cues_per_polarity))]]

    if rng.random() < cfg.multi_aspect_fraction:
        other = int(rng.integers(0, K - 1))
        other += other >= cat
        other_sent = (sent + 1 + int(rng.integers(0, 2))) % 3
        template = MULTI_TEMPLATES[int(rng.integers(0, len(MULTI_TEMPLATES)))]
        if rng.random() < 0.5:
            slots = {"T1": term(cat), "C1": cue(sent), "T2": term(other), "C2": cue(other_sent)}
            key = "T1"
        else:
            slots = {"T1": term(other), "C1": cue(other_sent), "T2": term(cat), "C2": cue(sent)}
            key = "T2"
    else:
        template = SINGLE_TEMPLATES[int(rng.integers(0, len(SINGLE_TEMPLATES)))]
        slots = {"T": term(cat), "C": cue(sent)}
        key = "T"
    tokens, spans = _fill(template, slots)
    return tokens, spans[key], cat, sent


def _source_examples(rng: Rng, cfg: SynthConfig, lex: _Lexicon, size: int):
    examples, terms = [], []
    for _ in range(size):
        tokens, (start, _), cat, sent = _sentence(rng, cfg, lex.source_terms, lex, 0.0)
        examples.append(SourceExample(tuple(tokens), tuple(lex.aspect_words[cat]), cat, sent))
        terms.append(start)
    return examples, terms


def _target_examples(rng: Rng, cfg: SynthConfig, lex: _Lexicon, size: int):
    out = []
    for _ in range(size):
        tokens, (start, length), _, sent = _sentence(
            rng, cfg, lex.target_terms, lex, cfg.target_multiword_fraction
        )
        out.append(TargetExample(tuple(tokens), start, length, sent))
    return out


def gen_synthetic(cfg: SynthConfig, seed: int) -> SyntheticCorpus:
    """Generate the source/target corpora; fully determined by (cfg, seed)."""
    cfg.validate()
    lex = _Lexicon(cfg)
    rng = Rng(seed)
    source, source_terms = _source_examples(rng.spawn(1), cfg, lex, cfg.source_size)
    target = _target_examples(rng.spawn(2), cfg, lex, cfg.target_size)
    source_test, source_test_terms = _source_examples(rng.spawn(3), cfg, lex, cfg.source_test_size)
    target_test = _target_examples(rng.spawn(4), cfg, lex, cfg.target_test_size)
    vectors = synthetic_vectors(cfg, lex, rng.spawn(5)) if cfg.embedding_dim else {}
    return SyntheticCorpus(lex.categories, source, source_terms, target,
                           source_test, source_test_terms, target_test, vectors)
