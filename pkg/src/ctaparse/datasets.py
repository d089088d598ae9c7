"""Weakly-supervised datasets from matched protocols.

Two datasets come out of a :class:`~ctaparse.matcher.MatchedGraph`:

* sequence labeling: every transcript sentence with IOBES tags over the
  matched spans;
* span-pair relations: ordered pairs of matched spans with their context
  windows, labeled ``next``/``if`` where the protocol has an edge and
  ``none`` otherwise.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .corpus import SpanError, TextSpan, Transcript, span_from_json, span_to_json
from .matcher import MatchedGraph
from .protocol import RelationLabel

__all__ = [
    "ContextWindow",
    "PairExample",
    "SamplingPortion",
    "SeqExample",
    "TAGS",
    "build_pair_dataset",
    "build_seq_dataset",
    "context_positions",
    "context_window",
    "iobes_tags",
    "is_valid_iobes",
    "label_counts",
    "make_pair",
    "sample_labels",
    "split_documents",
]

log = logging.getLogger(__name__)

TAGS = ("B", "I", "E", "S", "O")
POSITION_CLAMP = 10


@dataclass(frozen=True)
class SeqExample:
    doc: str
    sent_index: int
    tokens: tuple[str, ...]
    tags: tuple[str, ...]

    def to_json(self) -> dict:
        return {"doc": self.doc, "sent_index": self.sent_index, "tokens": list(self.tokens), "tags": list(self.tags)}

    @classmethod
    def from_json(cls, obj: dict) -> "SeqExample":
        return cls(obj["doc"], int(obj["sent_index"]), tuple(obj["tokens"]), tuple(obj["tags"]))


def is_valid_iobes(tags: Sequence[str]) -> bool:
    inside = False
    for tag in tags:
        if tag not in TAGS:
            return False
        if tag in ("I", "E") and not inside:
            return False
        if tag in ("B", "S", "O") and inside:
            return False
        inside = tag in ("B", "I")
    return not inside


def _union(spans: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for s, e in sorted(spans):
        if merged and s < merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], e)
        else:
            merged.append([s, e])
    return [(s, e) for s, e in merged]


def iobes_tags(sent_len: int, spans: Iterable[tuple[int, int]]) -> list[str]:
    """IOBES tags for a sentence; overlapping spans are unioned first."""
    tags = ["O"] * sent_len
    for s, e in _union(spans):
        if not 0 <= s < e <= sent_len:
            raise SpanError(f"span ({s}, {e}) out of bounds for length {sent_len}")
        if e - s == 1:
            tags[s] = "S"
        else:
            tags[s] = "B"
            tags[s + 1:e - 1] = ["I"] * (e - s - 2)
            tags[e - 1] = "E"
    return tags


def build_seq_dataset(m: MatchedGraph, t: Transcript) -> list[SeqExample]:
    per_sent: dict[int, list[tuple[int, int]]] = {}
    for r in m.matches.values():
        per_sent.setdefault(r.span.sent_index, []).append((r.span.start, r.span.end))
    return [
        SeqExample(t.id, ln.sent_index, ln.tokens, tuple(iobes_tags(len(ln.tokens), per_sent.get(ln.sent_index, ()))))
        for ln in t.lines
    ]


@dataclass(frozen=True)
class ContextWindow:
    """A span plus up to ``k`` neighbor sentences on each side.

    ``left``/``right`` hold ``(sent_index, tokens)`` in document order.
    ``span_tokens``/``before``/``after`` are the span and the rest of its
    own sentence.
    """

    span: TextSpan
    k: int
    left: tuple[tuple[int, tuple[str, ...]], ...]
    right: tuple[tuple[int, tuple[str, ...]], ...]
    span_tokens: tuple[str, ...]
    before: tuple[str, ...] = ()
    after: tuple[str, ...] = ()

    def tokens(self) -> list[str]:
        """Every token of the window in reading order.

        The rest of the span's own sentence is context from ``k = 1`` up; at
        ``k = 0`` the window is the span alone.
        """
        out: list[str] = []
        for _, toks in self.left:
            out.extend(toks)
        if self.k:
            out.extend(self.before)
        out.extend(self.span_tokens)
        if self.k:
            out.extend(self.after)
        for _, toks in self.right:
            out.extend(toks)
        return out

    def to_json(self, doc: str) -> dict:
        return {
            "span": span_to_json(self.span, doc),
            "k": self.k,
            "left": [{"sent_index": i, "tokens": list(toks)} for i, toks in self.left],
            "right": [{"sent_index": i, "tokens": list(toks)} for i, toks in self.right],
            "span_tokens": list(self.span_tokens),
            "before": list(self.before),
            "after": list(self.after),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ContextWindow":
        _, span = span_from_json(obj["span"])
        return cls(
            span,
            int(obj["k"]),
            tuple((int(s["sent_index"]), tuple(s["tokens"])) for s in obj["left"]),
            tuple((int(s["sent_index"]), tuple(s["tokens"])) for s in obj["right"]),
            tuple(obj["span_tokens"]),
            tuple(obj.get("before", ())),
            tuple(obj.get("after", ())),
        )


def context_window(t: Transcript, span: TextSpan, k: int) -> ContextWindow:
    if k < 0:
        raise ValueError(f"context level must be >= 0, got {k}")
    i = span.sent_index
    sent = t.lines[i].tokens
    if span.end > len(sent):
        raise SpanError(f"span {span} out of bounds")
    left = tuple((j, t.lines[j].tokens) for j in range(max(0, i - k), i))
    right = tuple((j, t.lines[j].tokens) for j in range(i + 1, min(len(t), i + k + 1)))
    return ContextWindow(span, k, left, right, sent[span.start:span.end], sent[:span.start], sent[span.end:])


def _clamp(x: int) -> int:
    return max(-POSITION_CLAMP, min(POSITION_CLAMP, x))


def context_positions(w: ContextWindow) -> list[int]:
    """Signed sentence-level positions of the window's units.

    One value per context sentence, plus two for the span sentence: ``-1``
    for the part left of the span and ``+1`` for the span and what follows.
    Sentences before the span sentence get ``p - p_t - 1``, after it
    ``p - p_t + 1``; everything is clamped to ``[-10, 10]``.
    """
    pt = w.span.sent_index
    out = [_clamp(p - pt - 1) for p, _ in w.left]
    out += [-1, 1]
    out += [_clamp(p - pt + 1) for p, _ in w.right]
    return out


@dataclass(frozen=True)
class PairExample:
    doc: str
    u: ContextWindow
    v: ContextWindow
    label: RelationLabel
    u_positions: tuple[int, ...]
    v_positions: tuple[int, ...]
    u_phrase: str = ""
    v_phrase: str = ""

    def to_json(self) -> dict:
        return {
            "doc": self.doc,
            "u": self.u.to_json(self.doc),
            "v": self.v.to_json(self.doc),
            "label": RelationLabel(self.label).value,
            "u_pos": list(self.u_positions),
            "v_pos": list(self.v_positions),
            "u_phrase": self.u_phrase,
            "v_phrase": self.v_phrase,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PairExample":
        return cls(
            obj["doc"],
            ContextWindow.from_json(obj["u"]),
            ContextWindow.from_json(obj["v"]),
            RelationLabel(obj["label"]),
            tuple(obj["u_pos"]),
            tuple(obj["v_pos"]),
            obj.get("u_phrase", ""),
            obj.get("v_phrase", ""),
        )


def make_pair(t: Transcript, u: TextSpan, v: TextSpan, k: int, label=RelationLabel.NONE, u_id="", v_id="") -> PairExample:
    wu = context_window(t, u, k)
    wv = context_window(t, v, k)
    return PairExample(t.id, wu, wv, RelationLabel(label), tuple(context_positions(wu)), tuple(context_positions(wv)), u_id, v_id)


def build_pair_dataset(m: MatchedGraph, t: Transcript, k: int) -> list[PairExample]:
    """Labeled pairs for projected protocol edges, ``none`` for every other ordered pair.

    Edges with an unmatched endpoint are dropped (and logged).
    """
    labeled: dict[tuple[str, str], RelationLabel] = {}
    dropped = 0
    for src, dst, label in m.protocol.edges:
        if src in m.matches and dst in m.matches:
            labeled.setdefault((src, dst), RelationLabel(label))
        else:
            dropped += 1
    if dropped:
        log.info("%s: %d protocol edge(s) dropped, endpoint unmatched", t.id, dropped)

    ids = [p.id for p in m.protocol.phrases if p.id in m.matches]
    out = []
    for a in ids:
        for b in ids:
            if a == b:
                continue
            label = labeled.get((a, b), RelationLabel.NONE)
            out.append(make_pair(t, m.matches[a].span, m.matches[b].span, k, label, a, b))
    return out


@dataclass(frozen=True)
class SamplingPortion:
    """Target ratio ``none : next : if``."""

    none_w: int
    next_w: int
    if_w: int

    def __post_init__(self):
        if min(self.none_w, self.next_w, self.if_w) <= 0:
            raise ValueError(f"sampling weights must be positive, got {self}")

    @classmethod
    def parse(cls, text: str) -> "SamplingPortion":
        parts = [p.strip() for p in text.replace("-", ":").split(":")]
        if len(parts) != 3:
            raise ValueError(f"expected none:next:if, got {text!r}")
        return cls(*(int(p) for p in parts))

    def __str__(self) -> str:
        return f"{self.none_w}:{self.next_w}:{self.if_w}"

    def targets(self, n_if: int) -> dict[RelationLabel, int]:
        return {
            RelationLabel.NONE: n_if * self.none_w // self.if_w,
            RelationLabel.NEXT: n_if * self.next_w // self.if_w,
            RelationLabel.IF: n_if,
        }


def sample_labels(pairs: Sequence[PairExample], portion: SamplingPortion, seed: int) -> list[PairExample]:
    """Keep every ``if`` pair and subsample the other labels to the portion.

    Selection is uniform without replacement and deterministic under
    ``seed``; the kept examples stay in their input order.
    """
    by_label: dict[RelationLabel, list[int]] = {lbl: [] for lbl in RelationLabel.order()}
    for i, p in enumerate(pairs):
        by_label[RelationLabel(p.label)].append(i)
    targets = portion.targets(len(by_label[RelationLabel.IF]))
    rng = random.Random(seed)
    keep: list[int] = []
    for lbl in RelationLabel.order():
        idx = by_label[lbl]
        want = targets[lbl]
        if want > len(idx):
            log.warning("sampling wants %d %s pairs, only %d available; keeping all", want, lbl.value, len(idx))
            want = len(idx)
        keep.extend(idx if want == len(idx) else rng.sample(idx, want))
    return [pairs[i] for i in sorted(keep)]


def label_counts(pairs: Iterable[PairExample]) -> dict[str, int]:
    c = Counter(RelationLabel(p.label).value for p in pairs)
    return {lbl.value: c.get(lbl.value, 0) for lbl in RelationLabel.order()}


def split_documents(doc_ids: Sequence[str], seed: int, fractions=(0.8, 0.1, 0.1)) -> dict[str, list[str]]:
    """Seeded train/dev/test split by document.

    Every split gets at least one document when there are three or more.
    """
    ids = sorted(doc_ids)
    random.Random(seed).shuffle(ids)
    n = len(ids)
    n_test = max(1, round(n * fractions[2])) if n >= 3 else 0
    n_dev = max(1, round(n * fractions[1])) if n >= 3 else 0
    n_train = n - n_dev - n_test
    return {
        "train": sorted(ids[:n_train]),
        "dev": sorted(ids[n_train:n_train + n_dev]),
        "test": sorted(ids[n_train + n_dev:]),
    }


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def dumps_jsonl(records: Iterable[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in records)
