import json
import random

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ctaparse.corpus import FormatError, TextSpan
from ctaparse.evaluation import (
    aggregate_runs,
    format_table,
    load_annotation,
    mention_metrics,
    phrase_accuracy,
    relation_metrics,
    token_metrics,
)
from ctaparse.protocol import RelationLabel

N, NX, IF = RelationLabel.NONE, RelationLabel.NEXT, RelationLabel.IF

# fixed confusion fixture: gold next x4, if x2, none x4; 3 next and 1 if hit, misses go to none
REL_GOLD = [NX] * 4 + [IF] * 2 + [N] * 4
REL_PRED = [NX] * 3 + [N] + [IF] + [N] + [N] * 4


def brute_micro(gold, pred, positives=(NX, IF)):
    tp = sum(g == p and g in positives for g, p in zip(gold, pred))
    npred = sum(p in positives for p in pred)
    ngold = sum(g in positives for g in gold)
    prec = tp / npred if npred else 0.0
    rec = tp / ngold if ngold else 0.0
    return 0.0 if prec + rec == 0 else 2 * prec * rec / (prec + rec)


def test_token_identical():
    m = token_metrics([["B", "E", "O"]], [["B", "E", "O"]])
    assert m.accuracy == 1.0 and m.f1 == 1.0


def test_token_one_wrong():
    assert token_metrics([["B", "I", "E", "O"]], [["B", "I", "E", "S"]]).accuracy == pytest.approx(0.75, abs=1e-12)


def test_token_macro_vs_micro():
    gold = [["O", "O"], ["O"] * 8]
    pred = [["O", "O"], ["O"] * 4 + ["S"] * 4]
    assert token_metrics(gold, pred).accuracy == pytest.approx(0.75, abs=1e-12)
    assert token_metrics(gold, pred, macro=False).accuracy == pytest.approx(0.6, abs=1e-12)


def test_token_macro_duplication_moves_toward_sentence():
    gold = [["O", "O"], ["O"] * 8]
    pred = [["O", "O"], ["O"] * 4 + ["S"] * 4]
    base = token_metrics(gold, pred).accuracy
    dup = token_metrics(gold + [gold[1]], pred + [pred[1]]).accuracy
    assert 0.5 < dup < base


def test_token_errors_name_sentence():
    with pytest.raises(ValueError, match="sentence 1"):
        token_metrics([["O"], ["O", "O"]], [["O"], ["O"]])
    with pytest.raises(ValueError):
        token_metrics([["O"]], [])


def test_token_f1_undefined_sentences_skipped():
    m = token_metrics([["O", "O"], ["S", "O"]], [["O", "O"], ["S", "O"]])
    assert m.per_sentence_f1 == [None, 1.0] and m.f1 == 1.0


def test_mention_examples():
    m = mention_metrics([[(0, 2), (3, 5), (6, 8), (9, 10)]], [[(0, 2), (3, 4)]])
    assert (m.n_gold, m.n_pred, m.hits) == (4, 2, 1)
    assert m.precision == pytest.approx(0.5, abs=1e-9)
    assert m.recall == pytest.approx(0.25, abs=1e-9)
    assert m.f1 == pytest.approx(1 / 3, abs=1e-9)
    assert m.accuracy == m.recall
    same = mention_metrics([[(0, 2)]], [[(0, 2)]])
    assert same.precision == same.recall == same.f1 == same.accuracy == 1.0
    off = mention_metrics([[(0, 2)]], [[(0, 3)]])
    assert off.hits == 0 and off.f1 == 0.0 and off.overlap_f1 == 1.0


@given(st.lists(st.tuples(st.sets(st.tuples(st.integers(0, 5), st.integers(1, 4))),
                          st.sets(st.tuples(st.integers(0, 5), st.integers(1, 4)))), max_size=5))
def test_mention_swap_symmetry(rows):
    gold = [[(a, a + b) for a, b in g] for g, _ in rows]
    pred = [[(a, a + b) for a, b in p] for _, p in rows]
    m, s = mention_metrics(gold, pred), mention_metrics(pred, gold)
    assert m.precision == s.recall and m.recall == s.precision and m.f1 == s.f1


def test_relation_confusion_fixture():
    m = relation_metrics(REL_GOLD, REL_PRED)
    assert m.confusion.tolist() == [[4, 0, 0], [1, 3, 0], [1, 0, 1]]
    assert m.accuracy == pytest.approx(0.8, abs=1e-9)
    assert m.micro_precision == pytest.approx(1.0, abs=1e-9)
    assert m.micro_recall == pytest.approx(4 / 6, abs=1e-9)
    assert m.micro_f1 == pytest.approx(0.8, abs=1e-9)
    assert m.micro_f1 == pytest.approx(brute_micro(REL_GOLD, REL_PRED), abs=1e-12)
    assert m.f1["next"] == pytest.approx(6 / 7, abs=1e-9)
    assert m.f1["if"] == pytest.approx(2 / 3, abs=1e-9)


def test_relation_all_none_and_all_correct():
    m = relation_metrics(REL_GOLD, [N] * len(REL_GOLD))
    assert m.micro_f1 == 0.0 and m.accuracy == pytest.approx(0.4, abs=1e-12)
    ok = relation_metrics(REL_GOLD, REL_GOLD)
    assert ok.accuracy == 1.0 and ok.micro_f1 == 1.0


def test_relation_random_against_oracle():
    rnd = random.Random(5)
    labels = [N, NX, IF]
    for _ in range(200):
        n = rnd.randint(1, 30)
        gold = [rnd.choice(labels) for _ in range(n)]
        pred = [rnd.choice(labels) for _ in range(n)]
        m = relation_metrics(gold, pred)
        assert m.micro_f1 == pytest.approx(brute_micro(gold, pred), abs=1e-12)
        assert m.confusion.sum() == n
        for i, lbl in enumerate(labels):
            assert m.confusion[i].sum() == gold.count(lbl)
            assert m.confusion[:, i].sum() == pred.count(lbl)
        for v in (m.accuracy, m.micro_f1, *m.f1.values()):
            assert 0.0 <= v <= 1.0


def test_micro_equals_label_f1_with_single_positive():
    gold = [NX, NX, N, N, NX]
    pred = [NX, N, NX, N, NX]
    m = relation_metrics(gold, pred)
    assert m.micro_f1 == pytest.approx(m.f1["next"], abs=1e-12)


def test_relation_include_none_flag():
    m = relation_metrics(REL_GOLD, REL_PRED, include_none=True)
    assert m.micro_f1 == pytest.approx(m.accuracy, abs=1e-12)


def test_aggregate_runs():
    mean, std = aggregate_runs([70, 72, 74, 76, 78])
    assert mean == 74 and std == pytest.approx(3.1623, abs=1e-3)
    assert aggregate_runs([1, 1, 1, 1, 1]) == (1, 0)
    assert aggregate_runs([0.3]) == (0.3, 0.0)
    with pytest.raises(ValueError):
        aggregate_runs([])


def test_phrase_accuracy():
    gold = {"a": TextSpan(0, 0, 2), "b": TextSpan(1, 0, 2), "c": None}
    assert phrase_accuracy(gold, {"a": TextSpan(0, 0, 2), "b": TextSpan(1, 0, 3)}) == 0.5
    assert phrase_accuracy({"c": None}, {}) == 1.0


def _write(path, recs):
    path.write_text("".join(json.dumps(r) + "\n" for r in recs))
    return path


def test_load_annotation(tmp_path):
    p = _write(tmp_path / "d1.ann.jsonl", [
        {"phrase_id": "p1", "gold_span": {"doc": "d1", "sent_index": 2, "start": 0, "end": 3}, "note": ""},
        {"phrase_id": "p2", "gold_span": None, "note": "noisy"},
        {"u_phrase": "p1", "v_phrase": "p2", "label": "next"},
    ])
    ann = load_annotation(p)
    assert ann.doc == "d1"
    assert ann.spans == {"p1": TextSpan(2, 0, 3), "p2": None}
    assert ann.relations == {("p1", "p2"): NX}
    again = load_annotation(_write(tmp_path / "d1b.jsonl", ann.to_records()))
    assert again.spans == ann.spans and again.relations == ann.relations and again.notes == ann.notes


@pytest.mark.parametrize("recs", [
    [{"phrase_id": "p1", "gold_span": None}, {"phrase_id": "p1", "gold_span": None}],
    [{"u_phrase": "a", "v_phrase": "b", "label": "if"}, {"u_phrase": "a", "v_phrase": "b", "label": "next"}],
    [{"something": 1}],
])
def test_load_annotation_errors(tmp_path, recs):
    with pytest.raises(FormatError):
        load_annotation(_write(tmp_path / "x.jsonl", recs))


def test_load_annotation_bad_json(tmp_path):
    p = tmp_path / "x.jsonl"
    p.write_text("{nope\n")
    with pytest.raises(FormatError, match="x.jsonl:1"):
        load_annotation(p)


def test_format_table():
    out = format_table(["Setting", "F1"], [["MaskMAX K=2", "70.1"], ["AVG K=0", "5.0"]], title="T")
    lines = out.splitlines()
    assert lines[0] == "T"
    assert lines[1].startswith("Setting") and set(lines[2]) == {"-"}
    assert len(lines[3]) == len(lines[4]) == len(lines[1])
    assert lines[4].endswith(" 5.0")
