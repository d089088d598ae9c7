"""End-to-end: extract spans, relate every ordered pair, assemble a flowchart."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import TextSpan, Transcript, span_from_json, span_text, span_to_json
from .crf import CrfModel, extract_spans, viterbi
from .datasets import SamplingPortion, make_pair
from .embeddings import EmbeddingTable
from .matcher import MatchedGraph, MatcherConfig, MatchMethod, MatchResult, MatchStatus
from .protocol import ProtocolGraph, RelationLabel
from .relation import ReModel, featurize, re_predict_features

__all__ = [
    "KnowledgeGraph",
    "PipelineConfig",
    "assemble",
    "atomic_write",
    "export_graph",
    "matched_from_report",
    "run_extract",
    "relate_pairs",
    "run_relate",
]


@dataclass
class KnowledgeGraph:
    doc: str
    nodes: list[tuple[str, TextSpan, str]] = field(default_factory=list)
    edges: list[tuple[str, str, RelationLabel, float]] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "doc": self.doc,
            "nodes": [{"id": nid, "span": span_to_json(s, self.doc), "text": text} for nid, s, text in self.nodes],
            "edges": [[a, b, RelationLabel(lbl).value, score] for a, b, lbl, score in self.edges],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "KnowledgeGraph":
        nodes = [(n["id"], span_from_json(n["span"])[1], n["text"]) for n in obj["nodes"]]
        edges = [(a, b, RelationLabel(lbl), float(s)) for a, b, lbl, s in obj["edges"]]
        return cls(obj["doc"], nodes, edges)


def run_extract(t: Transcript, m: CrfModel) -> list[TextSpan]:
    """Viterbi-decode every sentence and collect the spans in document order."""
    if set(m.tags) != {"B", "I", "E", "S", "O"}:
        raise ValueError(f"model tagset {m.tags} is not IOBES")
    spans = []
    for line in t.lines:
        if not line.tokens:
            continue
        for s, e in extract_spans(viterbi(m, line.tokens)):
            spans.append(TextSpan(line.sent_index, s, e))
    return spans


def relate_pairs(
    spans: Sequence[TextSpan], t: Transcript, model: ReModel, emb: EmbeddingTable, max_distance: int | None = None
) -> list[tuple[int, int, RelationLabel, dict[RelationLabel, float]]]:
    """Label and full score distribution for every ordered pair ``(i, j)``, ``i != j``.

    With ``max_distance`` pairs further apart (in sentences) are labeled
    ``none`` with certainty, without consulting the model.
    """
    k = model.config.k
    pairs, keys, out = [], [], []
    for i, u in enumerate(spans):
        for j, v in enumerate(spans):
            if i == j:
                continue
            if max_distance is not None and abs(v.sent_index - u.sent_index) > max_distance:
                out.append((i, j, RelationLabel.NONE, {lbl: float(lbl is RelationLabel.NONE) for lbl in model.labels}))
                continue
            pairs.append(make_pair(t, u, v, k))
            keys.append((i, j))
    if pairs:
        X = featurize(pairs, emb, model.config)
        for (i, j), x in zip(keys, X):
            label, scores = re_predict_features(model, x)
            out.append((i, j, label, scores))
    out.sort(key=lambda r: (r[0], r[1]))
    return out


def run_relate(
    spans: Sequence[TextSpan], t: Transcript, model: ReModel, emb: EmbeddingTable, max_distance: int | None = None
) -> list[tuple[int, int, RelationLabel, float]]:
    """Classify every ordered pair; the score is the probability of the predicted label."""
    return [(i, j, label, scores[label]) for i, j, label, scores in relate_pairs(spans, t, model, emb, max_distance)]


def assemble(
    spans: Sequence[TextSpan], predictions: Iterable[tuple[int, int, RelationLabel, float]], t: Transcript
) -> KnowledgeGraph:
    """Knowledge graph from spans and pairwise predictions.

    ``none`` predictions are dropped. If both directions of a pair carry a
    relation, only the higher-scoring one is kept (the earlier pair on a tie).
    """
    g = KnowledgeGraph(t.id, [(f"n{i}", s, span_text(t, s)) for i, s in enumerate(spans)])
    best: dict[frozenset[int], tuple[int, int, RelationLabel, float]] = {}
    seen: set[tuple[int, int]] = set()
    for i, j, label, score in predictions:
        if (i, j) in seen:
            raise ValueError(f"duplicate prediction for pair ({i}, {j})")
        seen.add((i, j))
        if not (0 <= i < len(spans) and 0 <= j < len(spans)) or i == j:
            raise ValueError(f"prediction ({i}, {j}) does not address two distinct spans")
        label = RelationLabel(label)
        if label is RelationLabel.NONE:
            continue
        key = frozenset((i, j))
        cur = best.get(key)
        if cur is None or score > cur[3] or (score == cur[3] and (i, j) < (cur[0], cur[1])):
            best[key] = (i, j, label, score)
    for i, j, label, score in sorted(best.values(), key=lambda r: (r[0], r[1])):
        g.edges.append((f"n{i}", f"n{j}", label, score))
    return g


def _dot_quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_graph(g: KnowledgeGraph, fmt: str = "dot") -> str:
    fmt = fmt.lower()
    if fmt == "json":
        return json.dumps(g.to_json(), sort_keys=True, indent=2) + "\n"
    if fmt != "dot":
        raise ValueError(f"unknown export format {fmt!r}")
    lines = ["digraph G {"]
    for nid, _, text in g.nodes:
        lines.append(f"  {nid} [label={_dot_quote(text)}];")
    for a, b, label, _ in g.edges:
        lines.append(f"  {a} -> {b} [label={_dot_quote(RelationLabel(label).value)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- stage plumbing ----------------------------------------------------------

@dataclass
class PipelineConfig:
    """Every tunable of a pipeline run; validated before any stage starts."""

    seed: int = 13
    threshold: float = 0.5
    span_min: int = 2
    span_max: int = 30
    search_scope: str = "source-lines"
    match_method: str = "fuzzy"
    k: int = 2
    portion: str = "4:2:1"
    pooling: str = "masked-max"
    crf_l2: float = 1.0
    crf_lr: float = 0.1
    crf_epochs: int = 50
    re_l2: float = 1.0
    re_lr: float = 0.5
    re_epochs: int = 200
    max_distance: int | None = None

    def validate(self) -> None:
        from .relation import ReConfig

        self.matcher()
        MatchMethod(self.match_method)
        SamplingPortion.parse(self.portion)
        ReConfig(pooling=self.pooling, k=self.k)
        for name in ("crf_l2", "re_l2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("crf_lr", "re_lr"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        for name in ("crf_epochs", "re_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def matcher(self) -> MatcherConfig:
        return MatcherConfig(self.threshold, self.span_min, self.span_max, self.search_scope)


def matched_from_report(graph: ProtocolGraph, doc: str, rows: Iterable[dict]) -> MatchedGraph:
    """Rebuild a :class:`MatchedGraph` from match-report records."""
    m = MatchedGraph(graph, doc)
    known = set(graph.ids)
    for r in rows:
        pid = r["phrase_id"]
        if pid not in known:
            raise ValueError(f"{doc}: report names unknown phrase {pid!r}")
        m.status[pid] = MatchStatus(r["status"])
        m.best_scores[pid] = float(r["score"])
        if r.get("span") is not None:
            _, span = span_from_json(r["span"])
            m.matches[pid] = MatchResult(pid, span, float(r["score"]), MatchMethod(r.get("method") or "fuzzy"))
    return m


def atomic_write(path: str | Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
