import json

import numpy as np
import pytest

from mgan.corpus import (
    CorpusError,
    EmbeddingConfigError,
    SourceExample,
    SynthConfig,
    SynthConfigError,
    TargetExample,
    Vocab,
    build_vocab,
    collate,
    embedding_table,
    gen_synthetic,
    load_corpus,
    load_embeddings,
    load_manifest,
    make_batches,
    write_corpus,
)
from mgan.numerics import Rng


def _write_lines(path, header, records):
    lines = [json.dumps(header)] + [json.dumps(r) for r in records]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def test_load_three_target_records(tmp_path):
    p = tmp_path / "t.jsonl"
    recs = [
        {"context": ["the", "fish", "was", "good"], "span_start": 1, "span_len": 1, "sentiment": "positive"},
        {"context": ["bad", "service"], "span_start": 1, "span_len": 1, "sentiment": "negative"},
        {"context": ["ok", "lobster", "roll"], "span_start": 1, "span_len": 2, "sentiment": "neutral"},
    ]
    _write_lines(p, {"kind": "target", "categories": []}, recs)
    examples, cats = load_corpus(p, "target")
    assert len(examples) == 3 and cats == []
    assert examples[2].aspect_words == ("lobster", "roll")
    assert [e.sentiment for e in examples] == [0, 2, 1]


def test_span_out_of_bounds_names_the_record(tmp_path):
    p = tmp_path / "t.jsonl"
    recs = [
        {"context": ["a", "b"], "span_start": 0, "span_len": 1, "sentiment": "positive"},
        {"context": ["a", "b"], "span_start": 1, "span_len": 2, "sentiment": "positive"},
    ]
    _write_lines(p, {"kind": "target", "categories": []}, recs)
    with pytest.raises(CorpusError, match="line 3"):
        load_corpus(p, "target")


def test_source_category_outside_declared_set(tmp_path):
    p = tmp_path / "s.jsonl"
    recs = [{"context": ["x"], "aspect": ["food"], "category": "drinks", "sentiment": "positive"}]
    _write_lines(p, {"kind": "source", "categories": ["food", "service"]}, recs)
    with pytest.raises(CorpusError, match="drinks"):
        load_corpus(p, "source")


def test_malformed_line_reports_line_number(tmp_path):
    p = tmp_path / "s.jsonl"
    p.write_text('{"kind": "target", "categories": []}\n{"context": [\n', encoding="utf-8")
    with pytest.raises(CorpusError, match="line 2"):
        load_corpus(p, "target")


def test_build_vocab_threshold_and_order():
    ex = [SourceExample(("a", "a", "a", "b"), ("c",), 0, 0)]
    v = build_vocab([ex], min_count=2)
    assert "a" in v and "b" not in v
    assert v.id("b") == 1
    v1 = build_vocab([ex])
    assert v1.itos[2:] == ["a", "b", "c"]  # frequency desc, then lexicographic
    assert build_vocab([ex]).stoi == v1.stoi


def test_empty_vocab_has_only_reserved():
    v = build_vocab([[]])
    assert v.itos == ["<pad>", "<unk>"]


def test_vocab_bijective():
    v = Vocab(["x", "y", "z"])
    assert all(v.id(v.token(i)) == i for i in range(len(v)))


def _vec_line(tok, vals):
    return tok + " " + " ".join(repr(float(x)) for x in vals)


def test_load_embeddings_coverage_and_fallback(tmp_path):
    v = Vocab(["the", "fish", "rare"])
    rows = np.arange(400, dtype=float).reshape(2, 200) / 1000.0
    p = tmp_path / "vec.txt"
    p.write_text(_vec_line("the", rows[0]) + "\n" + _vec_line("fish", rows[1]) + "\n", encoding="utf-8")
    table, coverage = load_embeddings(p, v, 200, Rng(0))
    assert coverage == 2
    assert np.array_equal(table[v.id("the")], rows[0])
    assert np.array_equal(table[v.id("fish")], rows[1])
    assert np.all(np.abs(table[v.id("rare")]) <= 0.01)
    assert np.all(table[0] == 0.0)


def test_load_embeddings_dim_mismatch_is_config_error(tmp_path):
    p = tmp_path / "vec.txt"
    p.write_text(_vec_line("the", np.zeros(50)) + "\n", encoding="utf-8")
    with pytest.raises(EmbeddingConfigError):
        load_embeddings(p, Vocab(["the"]), 200, Rng(0))


def test_load_embeddings_bad_arity_is_parse_error(tmp_path):
    p = tmp_path / "vec.txt"
    p.write_text(_vec_line("the", np.zeros(4)) + "\n" + _vec_line("fish", np.zeros(3)) + "\n", encoding="utf-8")
    with pytest.raises(CorpusError, match="line 2"):
        load_embeddings(p, Vocab(["the", "fish"]), 4, Rng(0))


def _targets(lengths):
    return [TargetExample(tuple(f"w{i}" for i in range(n)), 0, 1, 0) for n in lengths]


def test_batch_sizes():
    ex = _targets([3] * 100)
    v = build_vocab([ex])
    sizes = [b.size for b in make_batches(ex, 32, v, Rng(0))]
    assert sizes == [32, 32, 32, 4]


def test_every_example_once_per_epoch():
    ex = _targets(list(range(1, 51)))
    v = build_vocab([ex])
    idx = np.concatenate([b.index for b in make_batches(ex, 7, v, Rng(3))])
    assert sorted(idx.tolist()) == list(range(50))


def test_padding_to_batch_max():
    ex = _targets([3, 5])
    b = collate(ex, build_vocab([ex]))
    assert b.context_ids.shape == (2, 5)
    assert b.context_mask.sum(axis=1).tolist() == [3, 5]
    assert b.lengths.tolist() == [3, 5]
    assert np.all(b.context_ids[~b.context_mask] == 0)


def test_same_seed_same_batch_order():
    ex = _targets([2] * 40)
    v = build_vocab([ex])
    a = [b.index.tolist() for b in make_batches(ex, 8, v, Rng(5))]
    b = [b.index.tolist() for b in make_batches(ex, 8, v, Rng(5))]
    assert a == b


def test_gen_synthetic_counts_and_spans():
    c = gen_synthetic(SynthConfig(source_size=1000, target_size=200), 7)
    assert len(c.source) == 1000 and len(c.target) == 200
    assert len(c.source_terms) == 1000
    for ex in c.target:
        assert ex.span_start + ex.span_len <= len(ex.context)


def test_source_manifest_points_at_category_term():
    c = gen_synthetic(SynthConfig(source_size=300), 2)
    for ex, pos in zip(c.source, c.source_terms):
        assert ex.context[pos].startswith(f"s{ex.category_id}t")


def test_target_terms_disjoint_from_source_terms():
    c = gen_synthetic(SynthConfig(source_size=300, target_size=300), 2)
    src = {ex.context[p] for ex, p in zip(c.source, c.source_terms)}
    tgt = {w for ex in c.target for w in ex.aspect_words}
    assert not src & tgt


def test_gen_synthetic_byte_identical(tmp_path):
    cfg = SynthConfig(source_size=200, target_size=50, source_test_size=20, target_test_size=20)
    pa = gen_synthetic(cfg, 11).write(tmp_path / "a")
    pb = gen_synthetic(cfg, 11).write(tmp_path / "b")
    for key in pa:
        assert pa[key].read_bytes() == pb[key].read_bytes()


def test_overlapping_lexicons_rejected():
    cfg = SynthConfig(n_categories=2, source_lexicons=[["salmon", "tuna"], ["tuna", "waiter"]])
    with pytest.raises(SynthConfigError, match="tuna"):
        gen_synthetic(cfg, 0)


def test_round_trip(tmp_path):
    c = gen_synthetic(SynthConfig(source_size=100, target_size=40), 3)
    paths = c.write(tmp_path)
    src, cats = load_corpus(paths["source"], "source")
    tgt, _ = load_corpus(paths["target"], "target")
    assert src == c.source and tgt == c.target and cats == c.categories
    assert load_manifest(paths["source_manifest"]) == c.source_terms


def test_write_corpus_round_trip_handwritten(tmp_path):
    ex = [SourceExample(("great", "tuna"), ("food",), 1, 0)]
    write_corpus(tmp_path / "c.jsonl", ex, "source", ["service", "food"])
    back, cats = load_corpus(tmp_path / "c.jsonl", "source")
    assert back == ex and cats == ["service", "food"]


# -- synthetic embeddings -------------------------------------------------------
def test_synthetic_embeddings_round_trip_exactly(tmp_path):
    c = gen_synthetic(SynthConfig(source_size=50, target_size=20, embedding_dim=16), 2)
    paths = c.write(tmp_path)
    v = build_vocab([c.source, c.target])
    table, covered = load_embeddings(paths["embeddings"], v, 16, Rng(0))
    assert covered == len(v) - 2
    for w, vec in c.vectors.items():
        if w in v:
            assert table[v.id(w)].tobytes() == vec.tobytes()
    mem, mem_covered = embedding_table(c.vectors, v, 16, Rng(0))
    assert mem_covered == covered and mem.tobytes() == table.tobytes()


def test_synthetic_embeddings_share_category_direction():
    c = gen_synthetic(SynthConfig(source_size=200, target_size=50, embedding_dim=64, embedding_noise=0.1), 0)
    cos = lambda a, b: a @ b / np.linalg.norm(a) / np.linalg.norm(b)  # noqa: E731
    src = {ex.context[t]: ex.category_id for ex, t in zip(c.source, c.source_terms)}
    tgt = {ex.context[ex.span_start + ex.span_len - 1] for ex in c.target}
    words = list(src)
    same = [cos(c.vectors[a], c.vectors[b]) for a in words for b in words if a < b and src[a] == src[b]]
    diff = [cos(c.vectors[a], c.vectors[b]) for a in words for b in words if src[a] != src[b]]
    assert min(same) > 0.9 and max(diff) < 0.5
    # every target term sits near exactly one source category direction
    for w in tgt:
        sims = sorted(cos(c.vectors[w], c.vectors[s]) for s in words)
        assert sims[-1] > 0.9


def test_embedding_dim_zero_disables_vectors(tmp_path):
    c = gen_synthetic(SynthConfig(source_size=20, target_size=10, embedding_dim=0), 1)
    assert c.vectors == {}
    assert "embeddings" not in c.write(tmp_path)


def test_embedding_table_dimension_mismatch():
    with pytest.raises(EmbeddingConfigError):
        embedding_table({"a": np.zeros(3)}, Vocab(["a"]), 4, Rng(0))
