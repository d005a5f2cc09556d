"""Corpora for the aspect-category (source) and aspect-term (target) tasks."""

from .data import (
    PAD_ID,
    SENTIMENT_ID,
    SENTIMENTS,
    UNK_ID,
    Batch,
    CorpusError,
    EmbeddingConfigError,
    Example,
    SourceExample,
    TargetExample,
    Vocab,
    atomic_write_text,
    build_vocab,
    collate,
    dump_corpus,
    load_corpus,
    embedding_table,
    load_embeddings,
    load_manifest,
    make_batches,
    split,
    split_indices,
    write_corpus,
    write_manifest,
)
from .synthetic import (
    SynthConfig,
    SynthConfigError,
    SyntheticCorpus,
    gen_synthetic,
    synthetic_vectors,
    write_embeddings,
)

__all__ = [
    "PAD_ID", "SENTIMENT_ID", "SENTIMENTS", "UNK_ID", "Batch", "CorpusError",
    "EmbeddingConfigError", "Example", "SourceExample", "SynthConfig", "SynthConfigError",
    "SyntheticCorpus", "TargetExample", "Vocab", "atomic_write_text", "build_vocab",
    "collate", "dump_corpus", "embedding_table", "gen_synthetic", "load_corpus", "load_embeddings",
    "load_manifest", "make_batches", "split", "split_indices", "synthetic_vectors", "write_corpus",
    "write_embeddings", "write_manifest",
]
