"""Map protocol phrases back to transcript text spans.

For each phrase the candidate spans are all n-grams (``span_min`` to
``span_max`` tokens) of the sentences named by the phrase's source lines.
The candidate with the highest cosine similarity wins; if that score does
not exceed ``threshold`` the phrase is dropped.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .corpus import TextSpan, Transcript, enumerate_spans, span_text, span_to_json, tokenize
from .embeddings import AveragePoolingEncoder, EmbeddingTable
from .protocol import ProtocolGraph, ProtocolPhrase

__all__ = [
    "MatchMethod",
    "MatchResult",
    "MatchStatus",
    "MatchedGraph",
    "MatcherConfig",
    "SearchScope",
    "candidate_spans",
    "exact_match_baseline",
    "match_phrase",
    "match_protocol",
    "match_report",
]

log = logging.getLogger(__name__)

# scores this close to the maximum count as ties (pooling order noise)
TIE_EPS = 1e-12


class SearchScope(str, enum.Enum):
    SOURCE_LINES = "source-lines"
    WHOLE_TRANSCRIPT = "whole-transcript"


class MatchMethod(str, enum.Enum):
    FUZZY = "fuzzy"
    EXACT = "exact"


class MatchStatus(str, enum.Enum):
    MATCHED = "correct-candidate"
    DROPPED = "dropped"
    UNINFORMATIVE = "uninformative"


@dataclass(frozen=True)
class MatcherConfig:
    threshold: float = 0.5
    span_min: int = 2
    span_max: int = 30
    search_scope: SearchScope = SearchScope.SOURCE_LINES

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must be in [0, 1], got {self.threshold}")
        if not 1 <= self.span_min <= self.span_max:
            raise ValueError(f"need 1 <= span_min <= span_max, got {self.span_min}, {self.span_max}")
        object.__setattr__(self, "search_scope", SearchScope(self.search_scope))


@dataclass(frozen=True)
class MatchResult:
    phrase_id: str
    span: TextSpan
    score: float
    method: MatchMethod = MatchMethod.FUZZY


@dataclass
class MatchedGraph:
    protocol: ProtocolGraph
    doc: str
    matches: dict[str, MatchResult] = field(default_factory=dict)
    status: dict[str, MatchStatus] = field(default_factory=dict)
    best_scores: dict[str, float] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)


def _as_encoder(emb):
    return AveragePoolingEncoder(emb) if isinstance(emb, EmbeddingTable) else emb


def _scope_indices(t: Transcript, scope: Iterable[int] | None, doc_hint: str = "") -> list[int]:
    if scope is None:
        return list(range(len(t)))
    out = []
    for line_no in sorted(set(scope)):
        idx = t.index_of_line(line_no)
        if idx is None:
            log.warning("%s: line %d is not in transcript %s, skipped", doc_hint or t.id, line_no, t.id)
            continue
        out.append(idx)
    return out


def candidate_spans(t: Transcript, scope: Iterable[int] | None, cfg: MatcherConfig) -> list[TextSpan]:
    """Enumerate candidate spans over the scoped sentences in document order.

    ``scope`` holds printed line numbers; ``None`` (or a whole-transcript
    config) searches every sentence.
    """
    if cfg.search_scope is SearchScope.WHOLE_TRANSCRIPT:
        scope = None
    spans: list[TextSpan] = []
    for idx in _scope_indices(t, scope):
        spans.extend(enumerate_spans(t.lines[idx], cfg.span_min, cfg.span_max))
    return spans


def _score(p: ProtocolPhrase, t: Transcript, cfg: MatcherConfig, encoder) -> tuple[TextSpan | None, float, MatchStatus]:
    tokens = tokenize(p.text)
    if not tokens:
        raise ValueError(f"phrase {p.id!r} has no tokens")
    cands = candidate_spans(t, p.source_lines, cfg)
    if not cands:
        return None, 0.0, MatchStatus.DROPPED
    pvec, p_oov = encoder.phrase(tokens, t.id, p.id)
    svecs, s_oov = encoder.spans(t, cands)
    lengths = np.array([len(s) for s in cands])
    if p_oov == len(tokens) and np.all(s_oov == lengths):
        return None, 0.0, MatchStatus.UNINFORMATIVE

    pn = np.linalg.norm(pvec)
    sn = np.linalg.norm(svecs, axis=1)
    denom = pn * sn
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(denom > 0, svecs @ pvec / np.where(denom > 0, denom, 1.0), 0.0)
    scores = np.clip(scores, -1.0, 1.0)
    best = float(scores.max())
    # ties: fewest OOV tokens, then earliest (sent_index, start, end), which is generation order
    tied = np.flatnonzero(scores >= best - TIE_EPS)
    i = int(tied[np.argmin(s_oov[tied])])
    status = MatchStatus.MATCHED if best > cfg.threshold else MatchStatus.DROPPED
    return cands[i], best, status


def match_phrase(p: ProtocolPhrase, t: Transcript, cfg: MatcherConfig, emb) -> MatchResult | None:
    """Best-scoring candidate span for ``p``, or None if it does not beat the threshold.

    ``emb`` is an :class:`EmbeddingTable` or any encoder with ``phrase`` and
    ``spans`` methods (see :mod:`ctaparse.embeddings`).
    """
    span, score, status = _score(p, t, cfg, _as_encoder(emb))
    if status is MatchStatus.UNINFORMATIVE:
        log.warning("phrase %s: uninformative embedding (phrase and candidates fully OOV)", p.id)
        return None
    if status is not MatchStatus.MATCHED:
        return None
    return MatchResult(p.id, span, score, MatchMethod.FUZZY)


def _longest_common_run(a: Sequence[str], b: Sequence[str]) -> tuple[int, int]:
    """Length and start in ``b`` of the longest common contiguous run (earliest on ties)."""
    best_len, best_end = 0, 0
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                cur[j] = prev[j - 1] + 1
                if cur[j] > best_len or (cur[j] == best_len and j < best_end):
                    best_len, best_end = cur[j], j
        prev = cur
    return best_len, best_end - best_len


def exact_match_baseline(
    p: ProtocolPhrase, t: Transcript, scope: Iterable[int] | None = None, min_len: int = 2
) -> TextSpan | None:
    """Longest run of phrase tokens found verbatim (case-insensitive) in a scoped sentence."""
    phrase = [w.lower() for w in tokenize(p.text)]
    if scope is None:
        scope = p.source_lines
    best: TextSpan | None = None
    for idx in _scope_indices(t, scope):
        sent = [w.lower() for w in t.lines[idx].tokens]
        n, start = _longest_common_run(phrase, sent)
        if n >= min_len and (best is None or n > len(best)):
            best = TextSpan(idx, start, start + n)
    return best


def match_protocol(
    g: ProtocolGraph, t: Transcript, cfg: MatcherConfig, emb=None, method: MatchMethod = MatchMethod.FUZZY
) -> MatchedGraph:
    """Match every phrase independently; results keep protocol order."""
    method = MatchMethod(method)
    out = MatchedGraph(g, t.id)
    encoder = _as_encoder(emb) if method is MatchMethod.FUZZY else None
    for p in g.phrases:
        if method is MatchMethod.EXACT:
            scope = None if cfg.search_scope is SearchScope.WHOLE_TRANSCRIPT else p.source_lines
            if scope is None:
                scope = [ln.line_no for ln in t.lines]
            span = exact_match_baseline(p, t, scope, min_len=cfg.span_min)
            if span is None:
                out.status[p.id] = MatchStatus.DROPPED
                out.best_scores[p.id] = 0.0
            else:
                out.matches[p.id] = MatchResult(p.id, span, 1.0, MatchMethod.EXACT)
                out.status[p.id] = MatchStatus.MATCHED
                out.best_scores[p.id] = 1.0
            continue
        span, score, status = _score(p, t, cfg, encoder)
        out.status[p.id] = status
        out.best_scores[p.id] = score
        if status is MatchStatus.MATCHED:
            out.matches[p.id] = MatchResult(p.id, span, score, MatchMethod.FUZZY)
        elif status is MatchStatus.UNINFORMATIVE:
            out.diagnostics.append(f"phrase {p.id}: uninformative embedding")
        elif span is None:
            out.diagnostics.append(f"phrase {p.id}: no candidate spans in scope")
        else:
            out.diagnostics.append(f"phrase {p.id}: best score {score:.4f} <= threshold {cfg.threshold}")
    return out


def match_report(m: MatchedGraph, t: Transcript) -> list[dict]:
    """One record per phrase, in protocol order."""
    rows = []
    for p in m.protocol.phrases:
        r = m.matches.get(p.id)
        rows.append({
            "phrase_id": p.id,
            "phrase_text": p.text,
            "span": None if r is None else span_to_json(r.span, m.doc),
            "span_text": None if r is None else span_text(t, r.span),
            "score": round(m.best_scores.get(p.id, 0.0), 12),
            "status": m.status.get(p.id, MatchStatus.DROPPED).value,
            "method": None if r is None else r.method.value,
        })
    return rows


def dumps_report(rows: list[dict]) -> str:
    return "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
