import pytest

from ctaparse.corpus import TextSpan
from ctaparse.evaluation import ManualAnnotation
from ctaparse.protocol import RelationLabel
from ctaparse.sweep import SweepResult, check_monotone, gold_pairs, summarize, sweep_table

from conftest import transcript


def _res(pooling, k, portion, seed, f1, test_set="generated"):
    return SweepResult(pooling, k, portion, seed, test_set, f1, f1, f1, f1)


def test_summarize_mean_and_std():
    rows = summarize([_res("masked-max", 2, "1:1:1", s, v) for s, v in enumerate([0.70, 0.72, 0.74, 0.76, 0.78])])
    assert len(rows) == 1
    assert rows[0]["runs"] == 5
    assert rows[0]["micro_f1"] == pytest.approx(0.74)
    assert rows[0]["micro_f1_std"] == pytest.approx(0.031623, abs=1e-6)


def test_table_layout():
    res = [_res(p, k, por, 0, 0.5 + k / 10, ts)
           for p in ("masked-max", "unmasked-avg") for k in (0, 1, 2) for por in ("1:1:1", "6:3:1")
           for ts in ("manual", "generated")]
    out = sweep_table(summarize(res))
    blocks = out.split("Sampling portion ")[1:]
    assert [b.split("\n", 1)[0] for b in blocks] == ["6:3:1", "1:1:1"]
    lines = blocks[0].splitlines()
    assert "generated Micro F1" in lines[1] and lines[1].index("generated") < lines[1].index("manual")
    names = [ln.split("  ")[0].strip() for ln in lines[3:] if ln]
    assert names == ["MaskMAX K=2", "MaskMAX K=1", "MaskMAX K=0", "AVG K=2", "AVG K=1", "AVG K=0"]
    assert "70.0 ± 0.0" in lines[3]


def test_check_monotone():
    res = [_res("unmasked-avg", 0, "1:1:1", 0, 0.5), _res("unmasked-avg", 2, "1:1:1", 0, 0.6),
           _res("unmasked-avg", 0, "4:2:1", 0, 0.5), _res("unmasked-avg", 2, "4:2:1", 0, 0.5),
           _res("masked-max", 0, "1:1:1", 0, 0.9), _res("masked-max", 2, "1:1:1", 0, 0.1)]
    failures = check_monotone(summarize(res))
    assert len(failures) == 1 and "4:2:1" in failures[0]
    assert len(check_monotone(summarize(res), pooling="masked-max")) == 1
    assert check_monotone(summarize(res), test_set="manual") == []


def test_gold_pairs_skip_noisy_phrases():
    t = transcript("1: [S] a b\n2: [S] c d\n3: [S] e f\n")
    ann = ManualAnnotation("d", {"1": TextSpan(0, 0, 2), "2": TextSpan(1, 0, 2), "3": None, "4": TextSpan(2, 0, 2)},
                           relations={("1", "2"): RelationLabel.NEXT})
    pairs = gold_pairs(ann, t, 1)
    assert len(pairs) == 6
    assert sum(p.label is RelationLabel.NEXT for p in pairs) == 1
    assert all(p.u_phrase != "3" and p.v_phrase != "3" for p in pairs)
