import io
import logging
import random

import pytest

from ctaparse.corpus import TextSpan, read_transcript, tokenize
from ctaparse.embeddings import EmbeddingTable, read_embeddings
from ctaparse.evaluation import load_annotation, phrase_accuracy
from ctaparse.fixtures import scramble_protocol
from ctaparse.matcher import (
    MatchMethod,
    MatcherConfig,
    MatchStatus,
    SearchScope,
    _longest_common_run,
    candidate_spans,
    exact_match_baseline,
    match_phrase,
    match_protocol,
    match_report,
)
from ctaparse.protocol import ProtocolGraph, ProtocolPhrase, parse_protocol, read_protocol

from conftest import transcript

CFG = MatcherConfig()


def phrase(text, lines, pid="1"):
    return ProtocolPhrase(pid, text, frozenset(lines))


def test_config_validation():
    with pytest.raises(ValueError):
        MatcherConfig(threshold=1.5)
    with pytest.raises(ValueError):
        MatcherConfig(span_min=3, span_max=2)
    assert MatcherConfig(search_scope="whole-transcript").search_scope is SearchScope.WHOLE_TRANSCRIPT


def test_candidate_spans_examples(caplog):
    t = transcript("1: [S] x\n3: [S] a b c d")
    assert len(candidate_spans(t, {3}, CFG)) == 6
    with caplog.at_level(logging.WARNING):
        assert len(candidate_spans(t, {3, 99}, CFG)) == 6
    assert "99" in caplog.text
    assert candidate_spans(t, set(), CFG) == []


def test_verbatim_match_scores_one(toy_table):
    t = transcript("4: [S] you pass wire now")
    r = match_phrase(phrase("pass wire", {4}), t, CFG, toy_table)
    assert r.span == TextSpan(0, 1, 3) and r.score == pytest.approx(1.0)
    assert r.method is MatchMethod.FUZZY


def test_threshold_is_strict():
    # cosine((1,1,1,1), (1,0,0,0)) is exactly 0.5
    table = EmbeddingTable.from_dict({"x": [1, 1, 1, 1], "y": [1, 0, 0, 0]})
    t = transcript("1: [S] y y")
    p = phrase("x", {1})
    assert match_phrase(p, t, CFG, table) is None
    assert match_phrase(p, t, MatcherConfig(threshold=0.49), table).score == 0.5


def test_below_threshold_dropped():
    table = EmbeddingTable.from_dict({"x": [1.0, 0.0], "y": [0.49, (1 - 0.49 ** 2) ** 0.5]})
    t = transcript("1: [S] y y")
    m = match_protocol(ProtocolGraph([phrase("x", {1})], []), t, CFG, table)
    assert m.matches == {} and m.status["1"] is MatchStatus.DROPPED
    assert m.best_scores["1"] == pytest.approx(0.49)


def test_tie_breaks_to_earliest_span(toy_table):
    t = transcript("1: [S] pass wire\n2: [S] pass wire")
    r = match_phrase(phrase("pass wire", {1, 2}), t, CFG, toy_table)
    assert r.span == TextSpan(0, 0, 2)


def test_tie_prefers_fewer_oov_tokens(toy_table):
    t = transcript("1: [S] um pass wire")
    r = match_phrase(phrase("pass wire", {1}), t, CFG, toy_table)
    assert r.span == TextSpan(0, 1, 3)


def test_uninformative(toy_table, caplog):
    t = transcript("1: [S] qq rr")
    with caplog.at_level(logging.WARNING):
        assert match_phrase(phrase("zz yy", {1}), t, CFG, toy_table) is None
    assert "uninformative" in caplog.text
    m = match_protocol(ProtocolGraph([phrase("zz yy", {1})], []), t, CFG, toy_table)
    assert m.status["1"] is MatchStatus.UNINFORMATIVE


def test_exact_baseline_examples():
    t = transcript("1: [S] now remove your needle\n2: [S] you pass the wire now\n3: [S] nothing here")
    assert exact_match_baseline(phrase("remove your needle", {1}), t) == TextSpan(0, 1, 4)
    assert exact_match_baseline(phrase("pass the wire quickly", {2}), t) == TextSpan(1, 1, 4)
    assert exact_match_baseline(phrase("pass wire", {3}), t) is None


def _brute_lcs(a, b):
    best = 0
    for i in range(len(a)):
        for j in range(len(b)):
            n = 0
            while i + n < len(a) and j + n < len(b) and a[i + n] == b[j + n]:
                n += 1
            best = max(best, n)
    return best


def test_exact_baseline_maximal_brute_force():
    rnd = random.Random(3)
    for _ in range(300):
        a = [rnd.choice("abc") for _ in range(rnd.randint(1, 8))]
        b = [rnd.choice("abc") for _ in range(rnd.randint(1, 20))]
        n, start = _longest_common_run(a, b)
        assert n == _brute_lcs(a, b)
        if n:
            seg = b[start:start + n]
            assert any(a[i:i + n] == seg for i in range(len(a)))
        t = transcript("1: [S] " + " ".join(b))
        got = exact_match_baseline(phrase(" ".join(a), {1}), t)
        assert (got is None) == (n < 2)
        if got is not None:
            assert len(got) == n


def test_match_protocol_examples(toy_table):
    t = transcript("1: [S] pass wire\n2: [S] remove the needle")
    g = parse_protocol(io.StringIO("1. pass wire (line 1)\n2. remove needle (line 2)"))
    m = match_protocol(g, t, CFG, toy_table)
    assert list(m.matches) == ["1", "2"]
    empty = match_protocol(ProtocolGraph([], []), t, CFG, toy_table)
    assert empty.matches == {}


def test_one_of_three_dropped():
    table = EmbeddingTable.from_dict({"a": [1, 0, 0], "b": [0, 1, 0], "c": [0, 0, 1]})
    t = transcript("1: [S] a a\n2: [S] b b\n3: [S] a b")
    g = ProtocolGraph([phrase("a a", {1}, "1"), phrase("b", {2}, "2"), phrase("c c", {3}, "3")], [])
    assert sorted(match_protocol(g, t, CFG, table).matches) == ["1", "2"]


def test_scope_monotone(separable_dir):
    emb = read_embeddings(separable_dir / "embeddings.txt")
    whole = MatcherConfig(search_scope=SearchScope.WHOLE_TRANSCRIPT)
    for doc in ("doc000", "doc001"):
        t = read_transcript(separable_dir / "transcripts" / f"{doc}.txt")
        g = scramble_protocol(read_protocol(separable_dir / "protocols" / f"{doc}.txt"), 1)
        a = match_protocol(g, t, CFG, emb).best_scores
        b = match_protocol(g, t, whole, emb).best_scores
        assert all(b[p] >= a[p] - 1e-12 for p in a)


def test_self_retrieval_every_sentence(separable_dir):
    emb = read_embeddings(separable_dir / "embeddings.txt")
    t = read_transcript(separable_dir / "transcripts" / "doc004.txt")
    for ln in t.lines:
        if len(ln.tokens) < 2 or all(w.lower() not in emb for w in ln.tokens):
            continue
        r = match_phrase(phrase(" ".join(ln.tokens), {ln.line_no}), t, CFG, emb)
        assert r.score == pytest.approx(1.0)
        assert r.span.sent_index == ln.sent_index


@pytest.mark.parametrize("method", ["fuzzy", "exact"])
def test_fixture_mention_accuracy(separable_dir, method):
    emb = read_embeddings(separable_dir / "embeddings.txt")
    for path in sorted((separable_dir / "transcripts").iterdir()):
        t = read_transcript(path)
        g = read_protocol(separable_dir / "protocols" / path.name)
        m = match_protocol(g, t, CFG, emb, method)
        gold = load_annotation(separable_dir / "gold" / f"{t.id}.jsonl").spans
        assert phrase_accuracy(gold, {k: v.span for k, v in m.matches.items()}) == 1.0


def test_match_report_rows(toy_table):
    t = transcript("1: [S] pass wire")
    g = ProtocolGraph([phrase("pass wire", {1}, "1"), phrase("zz", {1}, "2")], [])
    rows = match_report(match_protocol(g, t, CFG, toy_table), t)
    # an OOV phrase against in-vocabulary candidates scores 0 and is dropped
    assert [r["status"] for r in rows] == ["correct-candidate", "dropped"]
    assert rows[0]["span_text"] == "pass wire" and rows[1]["span"] is None
    assert set(rows[0]) == {"phrase_id", "phrase_text", "span", "span_text", "score", "status", "method"}
