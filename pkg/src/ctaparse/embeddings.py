"""Word vectors, average-pooled phrase embeddings and cosine similarity."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, TextIO

import numpy as np

from .corpus import FormatError, TextSpan, Transcript

__all__ = [
    "AveragePoolingEncoder",
    "EmbeddingTable",
    "PrecomputedEncoder",
    "cosine",
    "embed_phrase",
    "load_embeddings",
    "phrase_key",
    "read_embeddings",
    "span_key",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class EmbeddingTable:
    """Lowercased token -> row of ``matrix``. Lookup is case-insensitive."""

    dim: int
    index: dict[str, int] = field(repr=False)
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.matrix.setflags(write=False)

    def __len__(self) -> int:
        return len(self.index)

    def __contains__(self, token: str) -> bool:
        return token.lower() in self.index

    def get(self, token: str) -> np.ndarray | None:
        i = self.index.get(token.lower())
        return None if i is None else self.matrix[i]

    @classmethod
    def from_dict(cls, vectors: dict[str, Sequence[float]]) -> "EmbeddingTable":
        if not vectors:
            raise FormatError("no vectors given")
        index: dict[str, int] = {}
        rows = []
        for tok, vec in vectors.items():
            key = tok.lower()
            if key in index:
                continue
            index[key] = len(rows)
            rows.append(vec)
        matrix = np.asarray(rows, dtype=np.float64)
        if matrix.ndim != 2:
            raise FormatError("vectors have inconsistent dimensions")
        return cls(matrix.shape[1], index, matrix)


def load_embeddings(source: TextIO | Iterable[str]) -> EmbeddingTable:
    """Read ``<token> <v1> ... <vd>`` lines (GloVe text format).

    The first occurrence of a token wins. A word2vec-style ``<count> <dim>``
    header line is skipped.
    """
    index: dict[str, int] = {}
    rows: list[list[float]] = []
    dim = None
    for pos, raw in enumerate(source, start=1):
        parts = raw.rstrip().split(" ")
        if not parts or not parts[0]:
            continue
        if pos == 1 and len(parts) == 2 and parts[0].isdigit() and parts[1].isdigit():
            continue
        try:
            vec = [float(x) for x in parts[1:]]
        except ValueError:
            raise FormatError(f"line {pos}: non-numeric vector component") from None
        if dim is None:
            if not vec:
                raise FormatError(f"line {pos}: token {parts[0]!r} has no vector")
            dim = len(vec)
        elif len(vec) != dim:
            raise FormatError(f"line {pos}: expected {dim} components, got {len(vec)}")
        if not all(np.isfinite(vec)):
            raise FormatError(f"line {pos}: non-finite vector component")
        key = parts[0].lower()
        if key in index:
            continue
        index[key] = len(rows)
        rows.append(vec)
    if dim is None:
        raise FormatError("embedding file is empty")
    return EmbeddingTable(dim, index, np.asarray(rows, dtype=np.float64))


def read_embeddings(path: str | Path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        return load_embeddings(fh)


def embed_phrase(tokens: Sequence[str], table: EmbeddingTable) -> tuple[np.ndarray, int]:
    """Mean of the in-vocabulary token vectors, and the number of OOV tokens.

    A fully out-of-vocabulary phrase embeds to the zero vector.
    """
    if len(tokens) == 0:
        raise ValueError("cannot embed an empty token list")
    found = [table.index[t.lower()] for t in tokens if t.lower() in table.index]
    oov = len(tokens) - len(found)
    if not found:
        return np.zeros(table.dim), oov
    return table.matrix[found].mean(axis=0), oov


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; 0.0 when either vector has zero norm."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    c = float(np.dot(u, v) / (nu * nv))
    return min(1.0, max(-1.0, c))


def span_key(doc: str, span: TextSpan) -> str:
    return f"{doc}/{span.sent_index}/{span.start}/{span.end}"


def phrase_key(doc: str, phrase_id: str) -> str:
    return f"{doc}/phrase/{phrase_id}"


class AveragePoolingEncoder:
    """Encodes phrases and candidate spans by averaging word vectors."""

    def __init__(self, table: EmbeddingTable):
        self.table = table
        self.dim = table.dim

    def phrase(self, tokens: Sequence[str], doc: str = "", phrase_id: str = "") -> tuple[np.ndarray, int]:
        return embed_phrase(tokens, self.table)

    def spans(self, t: Transcript, spans: Sequence[TextSpan]) -> tuple[np.ndarray, np.ndarray]:
        """Stacked span vectors and per-span OOV counts."""
        out = np.zeros((len(spans), self.dim))
        oov = np.zeros(len(spans), dtype=np.int64)
        for i, s in enumerate(spans):
            out[i], oov[i] = embed_phrase(t.lines[s.sent_index].tokens[s.start:s.end], self.table)
        return out, oov


class PrecomputedEncoder:
    """Vectors produced elsewhere, keyed by :func:`span_key` / :func:`phrase_key`.

    Reads JSONL records ``{"key": ..., "vector": [...]}``. Missing keys
    encode as zero vectors and count as fully out of vocabulary.
    """

    def __init__(self, vectors: dict[str, np.ndarray]):
        if not vectors:
            raise FormatError("no precomputed vectors")
        dims = {len(v) for v in vectors.values()}
        if len(dims) != 1:
            raise FormatError(f"precomputed vectors have mixed dimensions {sorted(dims)}")
        self.dim = dims.pop()
        self.vectors = vectors

    @classmethod
    def load(cls, path: str | Path) -> "PrecomputedEncoder":
        vectors = {}
        with open(path, encoding="utf-8") as fh:
            for pos, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    rec = json.loads(raw)
                    vectors.setdefault(rec["key"], np.asarray(rec["vector"], dtype=np.float64))
                except (ValueError, KeyError) as exc:
                    raise FormatError(f"{path}:{pos}: bad record ({exc})") from None
        return cls(vectors)

    def _get(self, key: str, n_tokens: int) -> tuple[np.ndarray, int]:
        v = self.vectors.get(key)
        if v is None:
            log.debug("no precomputed vector for %s", key)
            return np.zeros(self.dim), n_tokens
        return v, 0

    def phrase(self, tokens: Sequence[str], doc: str = "", phrase_id: str = "") -> tuple[np.ndarray, int]:
        return self._get(phrase_key(doc, phrase_id), len(tokens))

    def spans(self, t: Transcript, spans: Sequence[TextSpan]) -> tuple[np.ndarray, np.ndarray]:
        out = np.zeros((len(spans), self.dim))
        oov = np.zeros(len(spans), dtype=np.int64)
        for i, s in enumerate(spans):
            out[i], oov[i] = self._get(span_key(t.id, s), len(s))
        return out, oov
