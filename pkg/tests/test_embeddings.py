import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctaparse.corpus import FormatError, TextSpan
from ctaparse.embeddings import (
    AveragePoolingEncoder,
    EmbeddingTable,
    PrecomputedEncoder,
    cosine,
    embed_phrase,
    load_embeddings,
    span_key,
)

from conftest import transcript


def test_load_basic():
    t = load_embeddings(io.StringIO("a 1.0 0.0\nb 0.0 1.0"))
    assert t.dim == 2 and len(t) == 2


def test_load_dimension_error():
    with pytest.raises(FormatError):
        load_embeddings(io.StringIO("a 1.0\nb 1.0 2.0"))


def test_load_empty():
    with pytest.raises(FormatError):
        load_embeddings(io.StringIO(""))


@pytest.mark.parametrize("dim", [50, 300])
def test_load_reports_dim(dim, rng):
    lines = [f"w{i} " + " ".join(f"{x:.4f}" for x in rng.normal(size=dim)) for i in range(5)]
    assert load_embeddings(io.StringIO("\n".join(lines))).dim == dim


def test_duplicates_keep_first_and_case_insensitive():
    t = load_embeddings(io.StringIO("Wire 1 0\nwire 0 1"))
    assert np.array_equal(t.get("WIRE"), [1.0, 0.0])


def test_word2vec_header_skipped():
    t = load_embeddings(io.StringIO("2 2\na 1 0\nb 0 1"))
    assert len(t) == 2


def test_embed_phrase_examples():
    t = EmbeddingTable.from_dict({"a": [1.0, 0.0], "b": [0.0, 1.0]})
    v, oov = embed_phrase(["a"], t)
    assert np.array_equal(v, [1.0, 0.0]) and oov == 0
    v, oov = embed_phrase(["a", "b"], t)
    assert np.array_equal(v, [0.5, 0.5]) and oov == 0
    v, oov = embed_phrase(["zzz"], t)
    assert np.array_equal(v, [0.0, 0.0]) and oov == 1
    with pytest.raises(ValueError):
        embed_phrase([], t)


def test_cosine_examples():
    assert cosine([2, 0], [5, 0]) == 1.0
    assert cosine([1, 0], [0, 1]) == 0.0
    # the closed form is 1/sqrt(2); the 8-digit literal 0.70710678 is itself 1.2e-9 off
    assert cosine([1, 0], [1, 1]) == pytest.approx(2 ** -0.5, abs=1e-9)
    assert round(cosine([1, 0], [1, 1]), 8) == 0.70710678
    assert cosine([0, 0], [1, 1]) == 0.0
    with pytest.raises(ValueError):
        cosine([1, 0], [1, 0, 0])


def test_cosine_properties(rng):
    for _ in range(10_000):
        d = int(rng.integers(1, 8))
        u, v = rng.normal(size=d) * rng.exponential(10), rng.normal(size=d)
        c = cosine(u, v)
        assert abs(c) <= 1 + 1e-12
        assert c == cosine(v, u)
        assert not np.isnan(c)
    u = rng.normal(size=5)
    assert cosine(u, u) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=50)
@given(st.permutations(["pass", "wire", "the", "zzz", "remove"]))
def test_embed_permutation_invariant(tokens):
    t = EmbeddingTable.from_dict({"pass": [1, 0, 0], "wire": [0, 1, 0], "the": [0, 0, 1], "remove": [1, 1, 0]})
    v, oov = embed_phrase(tokens, t)
    ref, ref_oov = embed_phrase(sorted(tokens), t)
    assert np.allclose(v, ref, atol=1e-15) and oov == ref_oov == 1


def test_average_encoder_spans(toy_table):
    t = transcript("1: [S] pass the wire")
    mat, oov = AveragePoolingEncoder(toy_table).spans(t, [TextSpan(0, 0, 2), TextSpan(0, 1, 3)])
    assert np.allclose(mat, [[0.5, 0, 0.5], [0, 0.5, 0.5]])
    assert oov.tolist() == [0, 0]


def test_precomputed_encoder(tmp_path):
    t = transcript("1: [S] pass the wire", doc="d1")
    path = tmp_path / "vec.jsonl"
    path.write_text(json.dumps({"key": span_key("d1", TextSpan(0, 0, 2)), "vector": [1, 2]}) + "\n")
    enc = PrecomputedEncoder.load(path)
    mat, oov = enc.spans(t, [TextSpan(0, 0, 2), TextSpan(0, 1, 3)])
    assert mat.tolist() == [[1, 2], [0, 0]]
    assert oov.tolist() == [0, 2]


def test_precomputed_bad_record(tmp_path):
    path = tmp_path / "vec.jsonl"
    path.write_text("{not json}\n")
    with pytest.raises(FormatError):
        PrecomputedEncoder.load(path)
