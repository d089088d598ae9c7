"""Token, mention and relation metrics, run aggregation and annotation files."""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import FormatError, TextSpan, span_from_json
from .protocol import RelationLabel

__all__ = [
    "ManualAnnotation",
    "MentionMetrics",
    "RelationMetrics",
    "TokenMetrics",
    "aggregate_runs",
    "format_table",
    "load_annotation",
    "mention_metrics",
    "phrase_accuracy",
    "relation_metrics",
    "token_metrics",
]

LABELS = RelationLabel.order()


def _f1(p: float, r: float) -> float:
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


@dataclass
class TokenMetrics:
    accuracy: float
    f1: float
    per_sentence_accuracy: list[float] = field(default_factory=list)
    per_sentence_f1: list[float | None] = field(default_factory=list)


def token_metrics(gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]], macro: bool = True) -> TokenMetrics:
    """Token accuracy and span-membership F1 (non-``O`` vs ``O``).

    With ``macro`` every sentence weighs the same: per-sentence values are
    averaged. Sentences where neither side tags anything have no F1 and are
    left out of the F1 average. ``macro=False`` pools all tokens instead.
    """
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences but {len(pred)} predicted")
    accs: list[float] = []
    f1s: list[float | None] = []
    tot_ok = tot_n = tot_tp = tot_g = tot_p = 0
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise ValueError(f"sentence {i}: {len(g)} gold tags but {len(p)} predicted")
        if not g:
            continue
        ok = sum(a == b for a, b in zip(g, p))
        gpos = [t != "O" for t in g]
        ppos = [t != "O" for t in p]
        tp = sum(a and b for a, b in zip(gpos, ppos))
        ng, np_ = sum(gpos), sum(ppos)
        accs.append(ok / len(g))
        f1s.append(None if ng == 0 and np_ == 0 else _f1(tp / np_ if np_ else 0.0, tp / ng if ng else 0.0))
        tot_ok += ok
        tot_n += len(g)
        tot_tp += tp
        tot_g += ng
        tot_p += np_
    if macro:
        acc = float(np.mean(accs)) if accs else 1.0
        defined = [f for f in f1s if f is not None]
        f1 = float(np.mean(defined)) if defined else 1.0
    else:
        acc = tot_ok / tot_n if tot_n else 1.0
        f1 = 1.0 if tot_g == tot_p == 0 else _f1(tot_tp / tot_p if tot_p else 0.0, tot_tp / tot_g if tot_g else 0.0)
    return TokenMetrics(acc, f1, accs, f1s)


@dataclass
class MentionMetrics:
    precision: float
    recall: float
    f1: float
    accuracy: float
    n_gold: int
    n_pred: int
    hits: int
    overlap_f1: float = 0.0


def mention_metrics(gold: Sequence[Iterable[tuple[int, int]]], pred: Sequence[Iterable[tuple[int, int]]]) -> MentionMetrics:
    """Exact-boundary span matching, sentence by sentence.

    ``accuracy`` is the fraction of gold spans recovered exactly.
    ``overlap_f1`` is a looser diagnostic where any token overlap counts.
    """
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences but {len(pred)} predicted")
    n_g = n_p = hits = ov_p = ov_g = 0
    for g, p in zip(gold, pred):
        gs, ps = set(map(tuple, g)), set(map(tuple, p))
        n_g += len(gs)
        n_p += len(ps)
        hits += len(gs & ps)
        ov_p += sum(any(a < d and c < b for c, d in gs) for a, b in ps)
        ov_g += sum(any(a < d and c < b for c, d in ps) for a, b in gs)
    prec = hits / n_p if n_p else (1.0 if n_g == 0 else 0.0)
    rec = hits / n_g if n_g else (1.0 if n_p == 0 else 0.0)
    oprec = ov_p / n_p if n_p else (1.0 if n_g == 0 else 0.0)
    orec = ov_g / n_g if n_g else (1.0 if n_p == 0 else 0.0)
    return MentionMetrics(prec, rec, _f1(prec, rec), rec, n_g, n_p, hits, _f1(oprec, orec))


def phrase_accuracy(gold: Mapping[str, TextSpan | None], pred: Mapping[str, TextSpan | None]) -> float:
    """Fraction of phrases with a gold span whose predicted span is exactly that span."""
    keyed = [pid for pid, s in gold.items() if s is not None]
    if not keyed:
        return 1.0
    return sum(pred.get(pid) == gold[pid] for pid in keyed) / len(keyed)


@dataclass
class RelationMetrics:
    accuracy: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    f1: dict[str, float]
    confusion: np.ndarray
    labels: tuple[str, ...] = tuple(lbl.value for lbl in LABELS)

    def to_json(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "micro_precision": self.micro_precision,
            "micro_recall": self.micro_recall,
            "micro_f1": self.micro_f1,
            "f1": self.f1,
            "labels": list(self.labels),
            "confusion": self.confusion.astype(int).tolist(),
        }


def relation_metrics(gold: Sequence, pred: Sequence, include_none: bool = False) -> RelationMetrics:
    """Accuracy, micro-F1 over the positive labels and per-label F1.

    ``none`` is the negative class for micro-F1 unless ``include_none``.
    Confusion rows are gold labels, columns predictions, in none/next/if order.
    """
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold labels but {len(pred)} predicted")
    idx = {lbl: i for i, lbl in enumerate(LABELS)}
    C = np.zeros((3, 3), dtype=np.int64)
    for g, p in zip(gold, pred):
        C[idx[RelationLabel(g)], idx[RelationLabel(p)]] += 1
    n = int(C.sum())
    acc = float(np.trace(C) / n) if n else 1.0
    f1 = {}
    for lbl in LABELS:
        i = idx[lbl]
        tp, npred, ngold = C[i, i], C[:, i].sum(), C[i, :].sum()
        f1[lbl.value] = _f1(tp / npred if npred else 0.0, tp / ngold if ngold else 0.0)
    pos = [idx[lbl] for lbl in LABELS if include_none or lbl is not RelationLabel.NONE]
    tp = sum(C[i, i] for i in pos)
    npred = sum(C[:, i].sum() for i in pos)
    ngold = sum(C[i, :].sum() for i in pos)
    mp = tp / npred if npred else 0.0
    mr = tp / ngold if ngold else 0.0
    return RelationMetrics(acc, float(mp), float(mr), _f1(mp, mr), f1, C)


def aggregate_runs(values: Sequence[float]) -> tuple[float, float]:
    """Mean and sample standard deviation (0 for a single run)."""
    if len(values) == 0:
        raise ValueError("no runs to aggregate")
    mean = statistics.fmean(values)
    return mean, (statistics.stdev(values) if len(values) > 1 else 0.0)


# -- manual annotations ------------------------------------------------------

@dataclass
class ManualAnnotation:
    """Gold spans per phrase (None marks a noisy, unmatchable phrase) and gold pair labels."""

    doc: str
    spans: dict[str, TextSpan | None] = field(default_factory=dict)
    notes: dict[str, str] = field(default_factory=dict)
    relations: dict[tuple[str, str], RelationLabel] = field(default_factory=dict)

    def to_records(self) -> list[dict]:
        out = []
        for pid, span in self.spans.items():
            rec = {"phrase_id": pid, "gold_span": None, "note": self.notes.get(pid, "")}
            if span is not None:
                rec["gold_span"] = {"doc": self.doc, "sent_index": span.sent_index, "start": span.start, "end": span.end}
            out.append(rec)
        for (u, v), lbl in self.relations.items():
            out.append({"u_phrase": u, "v_phrase": v, "label": RelationLabel(lbl).value})
        return out


def load_annotation(path: str | Path, doc: str | None = None) -> ManualAnnotation:
    path = Path(path)
    ann = ManualAnnotation(doc or path.name.split(".")[0])
    with open(path, encoding="utf-8") as fh:
        for pos, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                rec = json.loads(raw)
            except ValueError as exc:
                raise FormatError(f"{path}:{pos}: {exc}") from None
            if "phrase_id" in rec:
                pid = str(rec["phrase_id"])
                if pid in ann.spans:
                    raise FormatError(f"{path}:{pos}: phrase {pid!r} annotated twice")
                gs = rec.get("gold_span")
                if gs is None:
                    ann.spans[pid] = None
                else:
                    d, span = span_from_json(gs)
                    ann.doc = d
                    ann.spans[pid] = span
                ann.notes[pid] = rec.get("note", "")
            elif "u_phrase" in rec:
                key = (str(rec["u_phrase"]), str(rec["v_phrase"]))
                if key in ann.relations:
                    raise FormatError(f"{path}:{pos}: pair {key} annotated twice")
                ann.relations[key] = RelationLabel(rec["label"])
            else:
                raise FormatError(f"{path}:{pos}: record is neither a phrase nor a pair annotation")
    return ann


# -- reporting ---------------------------------------------------------------

def format_table(headers: Sequence[str], rows: Sequence[Sequence], title: str | None = None) -> str:
    """Aligned plain-text table with a rule under the header."""
    cells = [[str(h) for h in headers]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    fmt = lambda r: "  ".join(c.rjust(w) if j else c.ljust(w) for j, (c, w) in enumerate(zip(r, widths)))  # noqa: E731
    lines = []
    if title:
        lines.append(title)
    lines.append(fmt(cells[0]))
    lines.append("-" * len(lines[-1]))
    lines.extend(fmt(r) for r in cells[1:])
    return "\n".join(lines) + "\n"


def pm(mean: float, std: float, scale: float = 100.0) -> str:
    return f"{mean * scale:.1f} ± {std * scale:.1f}"
