"""Examples, corpus files, vocabulary, pretrained vectors and padded batches."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from ..numerics import Rng

SENTIMENTS = ("positive", "neutral", "negative")
SENTIMENT_ID = {s: i for i, s in enumerate(SENTIMENTS)}

PAD, UNK = "<pad>", "<unk>"
PAD_ID, UNK_ID = 0, 1


class CorpusError(ValueError):
    """A corpus or embedding file is malformed or violates a record contract."""


class EmbeddingConfigError(ValueError):
    """Embedding file dimension disagrees with the configured dimension."""


@dataclass(frozen=True)
class SourceExample:
    context: tuple[str, ...]
    aspect_words: tuple[str, ...]
    category_id: int
    sentiment: int

    def __post_init__(self):
        if not self.context or not self.aspect_words:
            raise CorpusError("source example needs a nonempty context and aspect")
        if self.sentiment not in (0, 1, 2):
            raise CorpusError(f"sentiment id {self.sentiment} not in 0..2")


@dataclass(frozen=True)
class TargetExample:
    context: tuple[str, ...]
    span_start: int
    span_len: int
    sentiment: int

    def __post_init__(self):
        n = len(self.context)
        if n == 0:
            raise CorpusError("target example needs a nonempty context")
        if self.span_start < 0 or self.span_len < 1 or self.span_start + self.span_len > n:
            raise CorpusError(
                f"aspect span [{self.span_start}, {self.span_start + self.span_len}) "
                f"outside sentence of length {n}"
            )
        if self.sentiment not in (0, 1, 2):
            raise CorpusError(f"sentiment id {self.sentiment} not in 0..2")

    @property
    def aspect_words(self) -> tuple[str, ...]:
        return self.context[self.span_start:self.span_start + self.span_len]


Example = Union[SourceExample, TargetExample]


# -- files ----------------------------------------------------------------
def atomic_write_text(path, text: str) -> None:
    """Write via a sibling temp file and rename, so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _record(ex: Example, categories: Sequence[str]) -> dict:
    if isinstance(ex, SourceExample):
        return {
            "context": list(ex.context),
            "aspect": list(ex.aspect_words),
            "category": categories[ex.category_id],
            "sentiment": SENTIMENTS[ex.sentiment],
        }
    return {
        "context": list(ex.context),
        "span_start": ex.span_start,
        "span_len": ex.span_len,
        "sentiment": SENTIMENTS[ex.sentiment],
    }


def dump_corpus(examples: Sequence[Example], kind: str, categories: Sequence[str] = ()) -> str:
    header = {"kind": kind, "categories": list(categories)}
    lines = [json.dumps(header)]
    lines += [json.dumps(_record(ex, categories)) for ex in examples]
    return "\n".join(lines) + "\n"


def write_corpus(path, examples: Sequence[Example], kind: str, categories: Sequence[str] = ()) -> None:
    atomic_write_text(path, dump_corpus(examples, kind, categories))


def _tokens(value, what: str, lineno: int) -> tuple[str, ...]:
    if not isinstance(value, list) or not value or not all(isinstance(t, str) for t in value):
        raise CorpusError(f"line {lineno}: '{what}' must be a nonempty list of strings")
    return tuple(value)


def load_corpus(path, kind: str) -> tuple[list[Example], list[str]]:
    """Read a corpus file; returns the examples and the declared category set."""
    if kind not in ("source", "target"):
        raise ValueError(f"kind must be 'source' or 'target', got {kind!r}")
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines:
        raise CorpusError(f"{path}: empty file (missing header)")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as e:
        raise CorpusError(f"line 1: malformed header ({e.msg})") from None
    if not isinstance(header, dict) or header.get("kind") != kind:
        raise CorpusError(f"line 1: header declares kind {header.get('kind') if isinstance(header, dict) else None!r}, expected {kind!r}")
    categories = list(header.get("categories", []))
    cat_id = {c: i for i, c in enumerate(categories)}

    examples: list[Example] = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise CorpusError(f"line {lineno}: malformed record ({e.msg})") from None
        if not isinstance(rec, dict):
            raise CorpusError(f"line {lineno}: record is not an object")
        sentiment = rec.get("sentiment")
        if sentiment not in SENTIMENT_ID:
            raise CorpusError(f"line {lineno}: unknown sentiment {sentiment!r}")
        context = _tokens(rec.get("context"), "context", lineno)
        try:
            if kind == "source":
                category = rec.get("category")
                if category not in cat_id:
                    raise CorpusError(f"category {category!r} not in declared set {categories}")
                ex = SourceExample(context, _tokens(rec.get("aspect"), "aspect", lineno),
                                   cat_id[category], SENTIMENT_ID[sentiment])
            else:
                start, length = rec.get("span_start"), rec.get("span_len")
                if not isinstance(start, int) or not isinstance(length, int):
                    raise CorpusError("span_start and span_len must be integers")
                ex = TargetExample(context, start, length, SENTIMENT_ID[sentiment])
        except CorpusError as e:
            raise CorpusError(f"line {lineno}: {e}") from None
        examples.append(ex)
    return examples, categories


def write_manifest(path, positions: Sequence[int]) -> None:
    atomic_write_text(path, "".join(f"{int(p)}\n" for p in positions))


def load_manifest(path) -> list[int]:
    with open(path, encoding="utf-8") as f:
        return [int(line) for line in f if line.strip()]


# -- vocabulary -------------------------------------------------------------
class Vocab:
    """Token/id tables. Id 0 is padding, id 1 the shared unknown token."""

    def __init__(self, tokens: Sequence[str]):
        self.itos = [PAD, UNK] + [t for t in tokens if t not in (PAD, UNK)]
        self.stoi = {t: i for i, t in enumerate(self.itos)}

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def ids(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def token(self, i: int) -> str:
        return self.itos[i]

    def hash(self) -> str:
        return hashlib.sha256("\n".join(self.itos).encode("utf-8")).hexdigest()


def build_vocab(corpora: Iterable[Sequence[Example]], min_count: int = 1) -> Vocab:
    """Vocabulary over context and aspect tokens; ids by frequency desc, then token."""
    counts: Counter[str] = Counter()
    for corpus in corpora:
        for ex in corpus:
            counts.update(ex.context)
            if isinstance(ex, SourceExample):
                counts.update(ex.aspect_words)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocab(kept)


# -- embeddings -------------------------------------------------------------
def load_embeddings(path, vocab: Vocab, dim: int, rng: Rng) -> tuple[np.ndarray, int]:
    """Build a [|V|, dim] table from a GloVe-style text file.

    Rows for tokens found in the file are copied verbatim; other rows are drawn
    from U(-0.01, 0.01); the padding row is zero. Returns (table, coverage).
    """
    table = rng.uniform(-0.01, 0.01, (len(vocab), dim))
    table[PAD_ID] = 0.0
    covered = set()
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.rstrip("\n").split(" ")
            if not parts or parts == [""]:
                continue
            values = parts[1:]
            if lineno == 1 and len(values) != dim:
                raise EmbeddingConfigError(f"{path}: vectors have {len(values)} dimensions, config says {dim}")
            if len(values) != dim:
                raise CorpusError(f"{path}: line {lineno} has {len(values)} values, expected {dim}")
            try:
                vec = np.array([float(v) for v in values])
            except ValueError:
                raise CorpusError(f"{path}: line {lineno} has a non-numeric value") from None
            token = parts[0]
            if token in vocab.stoi and vocab.stoi[token] != PAD_ID:
                table[vocab.stoi[token]] = vec
                covered.add(token)
    return table, len(covered)


def embedding_table(vectors: dict[str, np.ndarray], vocab: Vocab, dim: int, rng: Rng) -> tuple[np.ndarray, int]:
    """In-memory counterpart of load_embeddings, with the same fallback and padding rules."""
    table = rng.uniform(-0.01, 0.01, (len(vocab), dim))
    table[PAD_ID] = 0.0
    covered = 0
    for token, vec in vectors.items():
        if len(vec) != dim:
            raise EmbeddingConfigError(f"vector for {token!r} has {len(vec)} dimensions, config says {dim}")
        if token in vocab.stoi and vocab.stoi[token] != PAD_ID:
            table[vocab.stoi[token]] = vec
            covered += 1
    return table, covered


# -- batching ----------------------------------------------------------------
@dataclass
class Batch:
    context_ids: np.ndarray       # [B, n_max] int
    context_mask: np.ndarray      # [B, n_max] bool
    aspect_ids: np.ndarray        # [B, m_max] int
    aspect_mask: np.ndarray       # [B, m_max] bool
    lengths: np.ndarray           # [B] true sentence lengths
    sentiment: np.ndarray         # [B]
    category_id: np.ndarray | None = None
    span_start: np.ndarray | None = None
    span_len: np.ndarray | None = None
    index: np.ndarray | None = None  # positions in the source example list

    @property
    def size(self) -> int:
        return self.context_ids.shape[0]

    @property
    def is_target(self) -> bool:
        return self.span_start is not None


def _pad(rows: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    width = max(len(r) for r in rows)
    ids = np.zeros((len(rows), width), dtype=np.int64)
    mask = np.zeros((len(rows), width), dtype=bool)
    for k, r in enumerate(rows):
        ids[k, :len(r)] = r
        mask[k, :len(r)] = True
    return ids, mask


def collate(examples: Sequence[Example], vocab: Vocab, index=None) -> Batch:
    ctx_ids, ctx_mask = _pad([vocab.ids(ex.context) for ex in examples])
    asp_ids, asp_mask = _pad([vocab.ids(ex.aspect_words) for ex in examples])
    batch = Batch(
        context_ids=ctx_ids,
        context_mask=ctx_mask,
        aspect_ids=asp_ids,
        aspect_mask=asp_mask,
        lengths=np.array([len(ex.context) for ex in examples], dtype=np.int64),
        sentiment=np.array([ex.sentiment for ex in examples], dtype=np.int64),
        index=None if index is None else np.asarray(index, dtype=np.int64),
    )
    if isinstance(examples[0], TargetExample):
        batch.span_start = np.array([ex.span_start for ex in examples], dtype=np.int64)
        batch.span_len = np.array([ex.span_len for ex in examples], dtype=np.int64)
    else:
        batch.category_id = np.array([ex.category_id for ex in examples], dtype=np.int64)
    return batch


def make_batches(
    examples: Sequence[Example], batch_size: int, vocab: Vocab, rng: Rng | None = None, shuffle: bool = True
) -> Iterator[Batch]:
    """One epoch of padded batches; every example appears exactly once."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = rng.permutation(len(examples)) if shuffle and rng is not None else np.arange(len(examples))
    for lo in range(0, len(examples), batch_size):
        idx = order[lo:lo + batch_size]
        yield collate([examples[i] for i in idx], vocab, index=idx)


def split_indices(n: int, fraction: float, rng: Rng) -> tuple[list[int], list[int]]:
    """Random (kept, held_out) index lists with ``fraction`` of ``n`` held out."""
    order = rng.permutation(n)
    k = int(round(n * fraction))
    return sorted(order[k:].tolist()), sorted(order[:k].tolist())


def split(examples: Sequence[Example], fraction: float, rng: Rng) -> tuple[list[Example], list[Example]]:
    keep, held = split_indices(len(examples), fraction, rng)
    return [examples[i] for i in keep], [examples[i] for i in held]
