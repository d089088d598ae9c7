"""Linear-chain CRF for span extraction.

Potentials are log-linear: each token contributes the summed emission rows
of its active features, and adjacent tags contribute a transition weight.
Two virtual states frame every sequence, so the transition matrix is
``(T + 2) x (T + 2)`` with ``START = T`` and ``STOP = T + 1``.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datasets import TAGS, SeqExample, is_valid_iobes

__all__ = [
    "CrfModel",
    "DataError",
    "FeatureVocab",
    "crf_objective",
    "crf_train",
    "extract_features",
    "extract_spans",
    "forward_backward",
    "log_partition_and_marginals",
    "path_score",
    "viterbi",
    "viterbi_decode",
]

log = logging.getLogger(__name__)

FORMAT = "ctaparse-crf"
VERSION = 1


class DataError(ValueError):
    """Training data is empty or carries invalid labels."""


def _shape(token: str) -> str:
    out: list[str] = []
    for ch in token:
        c = "X" if ch.isupper() else "x" if ch.islower() else "d" if ch.isdigit() else ch
        if len(out) >= 3 and out[-1] == out[-2] == out[-3] == c:
            continue
        out.append(c)
    return "".join(out)


def _position_bucket(i: int) -> str:
    if i < 2:
        return str(i)
    if i < 4:
        return "2-3"
    if i < 8:
        return "4-7"
    return "8+"


def extract_features(tokens: Sequence[str], i: int) -> list[str]:
    """Feature strings for token ``i``.

    Lowercased words in a +-2 window (padded with ``<BOS>``/``<EOS>``), the
    word shape, 1-3 character prefixes and suffixes, the previous/current
    bigram and a coarse sentence-position bucket.
    """
    n = len(tokens)

    def word(j: int) -> str:
        if j < 0:
            return "<BOS>"
        if j >= n:
            return "<EOS>"
        return tokens[j].lower()

    w = word(i)
    feats = ["bias"]
    for off in (-2, -1, 0, 1, 2):
        feats.append(f"w{off:+d}={word(i + off)}" if off else f"w0={w}")
    feats.append(f"shape0={_shape(tokens[i])}")
    for k in (1, 2, 3):
        if len(w) >= k:
            feats.append(f"pre{k}={w[:k]}")
            feats.append(f"suf{k}={w[-k:]}")
    feats.append(f"w-1|w0={word(i - 1)}|{w}")
    feats.append(f"w0|w+1={w}|{word(i + 1)}")
    feats.append(f"posb={_position_bucket(i)}")
    if i == 0:
        feats.append("BOS")
    if i == n - 1:
        feats.append("EOS")
    return feats


@dataclass
class FeatureVocab:
    index: dict[str, int] = field(default_factory=dict)
    frozen: bool = False

    def __len__(self) -> int:
        return len(self.index)

    def add(self, feat: str) -> int | None:
        i = self.index.get(feat)
        if i is None and not self.frozen:
            i = self.index[feat] = len(self.index)
        return i

    def freeze(self) -> "FeatureVocab":
        self.frozen = True
        return self

    def names(self) -> list[str]:
        out = [""] * len(self.index)
        for f, i in self.index.items():
            out[i] = f
        return out


@dataclass
class _Encoded:
    """Feature indices for one sentence, grouped by position for ``reduceat``."""

    feat_idx: np.ndarray
    pos: np.ndarray
    offsets: np.ndarray
    n: int


def _encode(tokens: Sequence[str], vocab: FeatureVocab) -> _Encoded:
    idx: list[int] = []
    pos: list[int] = []
    offsets: list[int] = []
    for i in range(len(tokens)):
        offsets.append(len(idx))
        for f in extract_features(tokens, i):
            j = vocab.add(f)
            if j is not None:
                idx.append(j)
                pos.append(i)
        if len(idx) == offsets[-1]:
            raise ValueError("bias feature missing from vocabulary")
    return _Encoded(np.asarray(idx, dtype=np.int64), np.asarray(pos, dtype=np.int64), np.asarray(offsets, dtype=np.int64), len(tokens))


def _emissions(enc: _Encoded, W: np.ndarray) -> np.ndarray:
    return np.add.reduceat(W[enc.feat_idx], enc.offsets, axis=0)


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(a - m), axis=axis))


def forward_backward(phi: np.ndarray, trans: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Log partition, node marginals ``(n, T)`` and edge marginals ``(n-1, T, T)``.

    ``phi`` holds per-position tag scores; ``trans`` is the framed
    ``(T + 2) x (T + 2)`` transition matrix.
    """
    n, T = phi.shape
    start, stop = T, T + 1
    A = trans[:T, :T]
    alpha = np.empty((n, T))
    beta = np.empty((n, T))
    alpha[0] = trans[start, :T] + phi[0]
    for i in range(1, n):
        alpha[i] = _logsumexp(alpha[i - 1][:, None] + A, axis=0) + phi[i]
    beta[n - 1] = trans[:T, stop]
    for i in range(n - 2, -1, -1):
        beta[i] = _logsumexp(A + (phi[i + 1] + beta[i + 1])[None, :], axis=1)
    logz = float(_logsumexp(alpha[n - 1] + trans[:T, stop], axis=0))
    node = np.exp(alpha + beta - logz)
    if n > 1:
        edge = np.exp(alpha[:-1, :, None] + A[None, :, :] + (phi[1:] + beta[1:])[:, None, :] - logz)
    else:
        edge = np.zeros((0, T, T))
    return logz, node, edge


def forward_logz(phi: np.ndarray, trans: np.ndarray) -> float:
    n, T = phi.shape
    A = trans[:T, :T]
    alpha = trans[T, :T] + phi[0]
    for i in range(1, n):
        alpha = _logsumexp(alpha[:, None] + A, axis=0) + phi[i]
    return float(_logsumexp(alpha + trans[:T, T + 1], axis=0))


def path_score(phi: np.ndarray, trans: np.ndarray, y: Sequence[int]) -> float:
    T = phi.shape[1]
    s = trans[T, y[0]] + trans[y[-1], T + 1]
    s += sum(phi[i, t] for i, t in enumerate(y))
    s += sum(trans[a, b] for a, b in zip(y[:-1], y[1:]))
    return float(s)


def viterbi_decode(phi: np.ndarray, trans: np.ndarray) -> list[int]:
    """Highest-scoring tag index sequence; ties go to the lower tag index."""
    n, T = phi.shape
    A = trans[:T, :T]
    delta = trans[T, :T] + phi[0]
    back = np.zeros((n, T), dtype=np.int64)
    for i in range(1, n):
        cand = delta[:, None] + A
        back[i] = np.argmax(cand, axis=0)
        delta = cand[back[i], np.arange(T)] + phi[i]
    best = int(np.argmax(delta + trans[:T, T + 1]))
    path = [best]
    for i in range(n - 1, 0, -1):
        best = int(back[i, best])
        path.append(best)
    return path[::-1]


@dataclass
class CrfModel:
    vocab: FeatureVocab
    emission: np.ndarray
    transition: np.ndarray
    tags: tuple[str, ...] = TAGS

    @classmethod
    def zeros(cls, vocab: FeatureVocab | None = None, tags: Sequence[str] = TAGS) -> "CrfModel":
        """All-zero weights; the vocabulary always gets at least the bias feature."""
        vocab = FeatureVocab() if vocab is None else vocab
        if "bias" not in vocab.index:
            vocab.index["bias"] = len(vocab.index)
        vocab.freeze()
        T = len(tags)
        return cls(vocab, np.zeros((len(vocab), T)), np.zeros((T + 2, T + 2)), tuple(tags))

    @property
    def n_tags(self) -> int:
        return len(self.tags)

    def emissions(self, tokens: Sequence[str]) -> np.ndarray:
        frozen = self.vocab.frozen
        self.vocab.frozen = True
        try:
            return _emissions(_encode(tokens, self.vocab), self.emission)
        finally:
            self.vocab.frozen = frozen

    def to_json(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "tags": list(self.tags),
            "features": self.vocab.names(),
            "emission": self.emission.tolist(),
            "transition": self.transition.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CrfModel":
        if obj.get("format") != FORMAT or obj.get("version") != VERSION:
            raise ValueError(f"not a {FORMAT} v{VERSION} model")
        vocab = FeatureVocab({f: i for i, f in enumerate(obj["features"])}, frozen=True)
        tags = tuple(obj["tags"])
        emission = np.asarray(obj["emission"], dtype=np.float64).reshape(len(vocab), len(tags))
        return cls(vocab, emission, np.asarray(obj["transition"], dtype=np.float64), tags)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CrfModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def log_partition_and_marginals(m: CrfModel, tokens: Sequence[str]):
    if len(tokens) == 0:
        raise ValueError("empty token sequence")
    return forward_backward(m.emissions(tokens), m.transition)


def viterbi(m: CrfModel, tokens: Sequence[str]) -> list[str]:
    if len(tokens) == 0:
        return []
    return [m.tags[i] for i in viterbi_decode(m.emissions(tokens), m.transition)]


def extract_spans(tags: Sequence[str]) -> list[tuple[int, int]]:
    """Half-open spans encoded by an IOBES sequence.

    Invalid fragments are repaired: an ``I`` or ``E`` with no open segment
    starts one, and a segment left open by ``O``, ``B``, ``S`` or the end
    of the sentence is closed at its last ``B``/``I`` token.
    """
    spans: list[tuple[int, int]] = []
    start = None
    for i, tag in enumerate(tags):
        if tag == "S":
            if start is not None:
                spans.append((start, i))
                start = None
            spans.append((i, i + 1))
        elif tag == "B":
            if start is not None:
                spans.append((start, i))
            start = i
        elif tag == "I":
            if start is None:
                start = i
        elif tag == "E":
            spans.append((i if start is None else start, i + 1))
            start = None
        else:
            if start is not None:
                spans.append((start, i))
                start = None
    if start is not None:
        spans.append((start, len(tags)))
    return spans


# -- training ---------------------------------------------------------------

def _seq_grad(enc: _Encoded, y: np.ndarray, W: np.ndarray, trans: np.ndarray, gW: np.ndarray, gT: np.ndarray) -> float:
    """Accumulate the gradient of ``-log p(y|x)`` into ``gW``/``gT``; return the loss."""
    T = W.shape[1]
    phi = _emissions(enc, W)
    logz, node, edge = forward_backward(phi, trans)
    gold = np.zeros_like(node)
    gold[np.arange(enc.n), y] = 1.0
    delta = node - gold
    np.add.at(gW, enc.feat_idx, delta[enc.pos])
    gT[T, :T] += node[0] - gold[0]
    gT[:T, T + 1] += node[-1] - gold[-1]
    if enc.n > 1:
        emp = np.zeros((T, T))
        np.add.at(emp, (y[:-1], y[1:]), 1.0)
        gT[:T, :T] += edge.sum(axis=0) - emp
    return logz - path_score(phi, trans, y)


def _prepare(data: Sequence[SeqExample], tags: Sequence[str]):
    if not data:
        raise DataError("no training sequences")
    tag_idx = {t: i for i, t in enumerate(tags)}
    vocab = FeatureVocab()
    encoded, labels = [], []
    for ex in data:
        if len(ex.tokens) == 0:
            continue
        if len(ex.tags) != len(ex.tokens):
            raise DataError(f"{ex.doc}/{ex.sent_index}: {len(ex.tags)} tags for {len(ex.tokens)} tokens")
        if tuple(tags) == TAGS and not is_valid_iobes(ex.tags):
            raise DataError(f"{ex.doc}/{ex.sent_index}: invalid IOBES sequence {' '.join(ex.tags)}")
        try:
            labels.append(np.asarray([tag_idx[t] for t in ex.tags], dtype=np.int64))
        except KeyError as exc:
            raise DataError(f"{ex.doc}/{ex.sent_index}: unknown tag {exc}") from None
        encoded.append(_encode(ex.tokens, vocab))
    if not encoded:
        raise DataError("no non-empty training sequences")
    vocab.freeze()
    return vocab, encoded, labels


def crf_objective(model: CrfModel, encoded, labels, l2: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Full-batch regularized negative log-likelihood, averaged per sequence, and its gradient."""
    N = len(encoded)
    gW = np.zeros_like(model.emission)
    gT = np.zeros_like(model.transition)
    loss = 0.0
    for enc, y in zip(encoded, labels):
        loss += _seq_grad(enc, y, model.emission, model.transition, gW, gT)
    loss = loss / N + 0.5 * l2 / N * (np.sum(model.emission ** 2) + np.sum(model.transition ** 2))
    gW = gW / N + l2 / N * model.emission
    gT = gT / N + l2 / N * model.transition
    return float(loss), gW, gT


def _objective_value(model: CrfModel, encoded, labels, l2: float) -> float:
    N = len(encoded)
    total = 0.0
    for enc, y in zip(encoded, labels):
        phi = _emissions(enc, model.emission)
        total += forward_logz(phi, model.transition) - path_score(phi, model.transition, y)
    reg = 0.5 * l2 * (np.sum(model.emission ** 2) + np.sum(model.transition ** 2))
    return float((total + reg) / N)


def crf_train(
    data: Sequence[SeqExample],
    l2: float = 1.0,
    lr: float = 0.1,
    epochs: int = 50,
    seed: int = 0,
    batch_size: int = 8,
    tags: Sequence[str] = TAGS,
) -> tuple[CrfModel, list[float]]:
    """Fit a CRF by mini-batch gradient descent on the regularized NLL.

    The step size decays as ``lr / sqrt(epoch)``. Gradients are summed over
    each mini-batch in example order. Returns the model and the objective
    (per-sequence average) after every epoch.
    """
    vocab, encoded, labels = _prepare(data, tags)
    model = CrfModel.zeros(vocab, tags)
    N = len(encoded)
    rng = np.random.default_rng(seed)
    trace: list[float] = []
    for epoch in range(1, epochs + 1):
        step = lr / math.sqrt(epoch)
        order = rng.permutation(N)
        for b in range(0, N, batch_size):
            batch = order[b:b + batch_size]
            gW = np.zeros_like(model.emission)
            gT = np.zeros_like(model.transition)
            for j in batch:
                _seq_grad(encoded[j], labels[j], model.emission, model.transition, gW, gT)
            frac = len(batch) / N
            gW += l2 * frac * model.emission
            gT += l2 * frac * model.transition
            model.emission -= step * gW
            model.transition -= step * gT
        trace.append(_objective_value(model, encoded, labels, l2))
        log.debug("crf epoch %d loss %.6f", epoch, trace[-1])
    return model, trace
