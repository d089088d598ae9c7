"""Span-pair relation classification over pooled word vectors.

Each side of a pair is a :class:`~ctaparse.datasets.ContextWindow`. The
masked pooling modes aggregate only the span's own token vectors, so the
context sentences never reach the pooled vector; ``unmasked-avg`` pools the
whole window. Context positions enter as bucket counts and the signed
sentence distance as a one-hot block. A multinomial logistic model scores
the three labels.
"""

from __future__ import annotations

import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .datasets import POSITION_CLAMP, ContextWindow, PairExample
from .embeddings import EmbeddingTable
from .protocol import RelationLabel

__all__ = [
    "PoolingMode",
    "ReConfig",
    "ReModel",
    "TrainingError",
    "feature_names",
    "featurize",
    "masked_pool",
    "pair_features",
    "re_objective",
    "re_predict",
    "re_train",
]

log = logging.getLogger(__name__)

FORMAT = "ctaparse-re"
VERSION = 1
LABELS = RelationLabel.order()


class TrainingError(ValueError):
    pass


class PoolingMode(str, enum.Enum):
    MASKED_AVG = "masked-avg"
    MASKED_MAX = "masked-max"
    UNMASKED_AVG = "unmasked-avg"


@dataclass(frozen=True)
class ReConfig:
    pooling: PoolingMode = PoolingMode.MASKED_MAX
    position_buckets: int = 2 * POSITION_CLAMP + 1
    # kept for parity with learned position embeddings; bucket counts are used instead
    position_emb_dim: int = 30
    k: int = 2

    def __post_init__(self):
        object.__setattr__(self, "pooling", PoolingMode(self.pooling))
        if self.position_buckets % 2 == 0 or self.position_buckets < 3:
            raise ValueError(f"position_buckets must be odd and >= 3, got {self.position_buckets}")
        if self.k < 0:
            raise ValueError(f"k must be >= 0, got {self.k}")

    @property
    def half(self) -> int:
        return self.position_buckets // 2


def _vectors(tokens: Sequence[str], emb: EmbeddingTable) -> np.ndarray:
    idx = [emb.index[t.lower()] for t in tokens if t.lower() in emb.index]
    return emb.matrix[idx]


def masked_pool(window: ContextWindow, emb: EmbeddingTable, mode: PoolingMode) -> np.ndarray:
    mode = PoolingMode(mode)
    tokens = window.tokens() if mode is PoolingMode.UNMASKED_AVG else window.span_tokens
    vecs = _vectors(tokens, emb)
    if len(vecs) == 0:
        log.debug("window %s has no in-vocabulary tokens, pooling to zeros", window.span)
        return np.zeros(emb.dim)
    if mode is PoolingMode.MASKED_MAX:
        return vecs.max(axis=0)
    return vecs.mean(axis=0)


def feature_names(dim: int, cfg: ReConfig) -> list[str]:
    h = cfg.half
    names = [f"u[{i}]" for i in range(dim)]
    names += [f"v[{i}]" for i in range(dim)]
    names += [f"|u-v|[{i}]" for i in range(dim)]
    names += [f"u*v[{i}]" for i in range(dim)]
    names += [f"upos={b:+d}" for b in range(-h, h + 1)]
    names += [f"vpos={b:+d}" for b in range(-h, h + 1)]
    names += [f"dist={b:+d}" for b in range(-h, h + 1)]
    names += ["overlap", "bias"]
    return names


def _histogram(positions: Sequence[int], h: int) -> np.ndarray:
    out = np.zeros(2 * h + 1)
    for p in positions:
        out[max(-h, min(h, p)) + h] += 1.0
    return out


def pair_features(p: PairExample, emb: EmbeddingTable, cfg: ReConfig) -> np.ndarray:
    h = cfg.half
    u = masked_pool(p.u, emb, cfg.pooling)
    v = masked_pool(p.v, emb, cfg.pooling)
    d = p.v.span.sent_index - p.u.span.sent_index
    dist = np.zeros(2 * h + 1)
    dist[int(math.copysign(min(abs(d), h), d)) + h] = 1.0
    su = {t.lower() for t in p.u.span_tokens}
    sv = {t.lower() for t in p.v.span_tokens}
    overlap = len(su & sv) / len(su | sv) if su | sv else 0.0
    return np.concatenate([
        u, v, np.abs(u - v), u * v,
        _histogram(p.u_positions, h), _histogram(p.v_positions, h),
        dist, [overlap, 1.0],
    ])


def featurize(pairs: Sequence[PairExample], emb: EmbeddingTable, cfg: ReConfig) -> np.ndarray:
    n = len(feature_names(emb.dim, cfg))
    if not pairs:
        return np.zeros((0, n))
    return np.vstack([pair_features(p, emb, cfg) for p in pairs])


@dataclass
class ReModel:
    features: list[str]
    weights: np.ndarray
    config: ReConfig = field(default_factory=ReConfig)
    labels: tuple[RelationLabel, ...] = LABELS
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    def standardize(self, X: np.ndarray) -> np.ndarray:
        if self.mean is not None:
            X = X - self.mean
        if self.scale is not None:
            X = X / self.scale
        return X

    def scores(self, X: np.ndarray) -> np.ndarray:
        return _softmax(self.standardize(X) @ self.weights)

    def to_json(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "labels": [lbl.value for lbl in self.labels],
            "config": {
                "pooling": self.config.pooling.value,
                "position_buckets": self.config.position_buckets,
                "position_emb_dim": self.config.position_emb_dim,
                "k": self.config.k,
            },
            "features": self.features,
            "weights": self.weights.tolist(),
            "mean": None if self.mean is None else self.mean.tolist(),
            "scale": None if self.scale is None else self.scale.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ReModel":
        if obj.get("format") != FORMAT or obj.get("version") != VERSION:
            raise ValueError(f"not a {FORMAT} v{VERSION} model")
        arr = lambda x: None if x is None else np.asarray(x, dtype=np.float64)  # noqa: E731
        return cls(
            list(obj["features"]),
            np.asarray(obj["weights"], dtype=np.float64),
            ReConfig(**obj["config"]),
            tuple(RelationLabel(x) for x in obj["labels"]),
            arr(obj.get("mean")),
            arr(obj.get("scale")),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ReModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def re_objective(W: np.ndarray, X: np.ndarray, y: np.ndarray, l2: float) -> tuple[float, np.ndarray]:
    """Mean cross-entropy plus ``l2 / (2N) * ||W||^2``, and its gradient."""
    N = len(y)
    P = _softmax(X @ W)
    loss = -np.mean(np.log(P[np.arange(N), y] + 1e-300)) + 0.5 * l2 / N * np.sum(W ** 2)
    P[np.arange(N), y] -= 1.0
    grad = X.T @ P / N + l2 / N * W
    return float(loss), grad


def re_train(
    data: Sequence[PairExample],
    emb: EmbeddingTable,
    cfg: ReConfig = ReConfig(),
    l2: float = 1.0,
    lr: float = 0.5,
    epochs: int = 200,
    seed: int = 0,
    batch_size: int = 32,
) -> tuple[ReModel, list[float]]:
    """Fit the relation classifier by mini-batch gradient descent.

    Features are standardized with statistics from ``data``; the scaler is
    stored in the model. Returns the model and the full-data objective after
    each epoch.
    """
    if not data:
        raise TrainingError("no training pairs")
    label_idx = {lbl: i for i, lbl in enumerate(LABELS)}
    y = np.asarray([label_idx[RelationLabel(p.label)] for p in data], dtype=np.int64)
    if len(set(y.tolist())) < 2:
        raise TrainingError("training pairs carry a single label; nothing to discriminate")
    X = featurize(data, emb, cfg)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    # constant columns (including bias) are left unscaled and uncentered
    const = scale < 1e-12
    mean[const] = 0.0
    scale[const] = 1.0
    Xs = (X - mean) / scale
    N, F = Xs.shape
    W = np.zeros((F, len(LABELS)))
    rng = np.random.default_rng(seed)
    trace = []
    for epoch in range(1, epochs + 1):
        step = lr / math.sqrt(epoch)
        order = rng.permutation(N)
        for b in range(0, N, batch_size):
            batch = order[b:b + batch_size]
            P = _softmax(Xs[batch] @ W)
            P[np.arange(len(batch)), y[batch]] -= 1.0
            g = Xs[batch].T @ P / len(batch) + l2 / N * W
            W -= step * g
        trace.append(re_objective(W, Xs, y, l2)[0])
    names = feature_names(emb.dim, cfg)
    return ReModel(names, W, cfg, LABELS, mean, scale), trace


def re_predict_features(m: ReModel, x: np.ndarray) -> tuple[RelationLabel, dict[RelationLabel, float]]:
    s = m.scores(np.atleast_2d(x))[0]
    return m.labels[int(np.argmax(s))], {lbl: float(v) for lbl, v in zip(m.labels, s)}


def re_predict(m: ReModel, p: PairExample, emb: EmbeddingTable) -> tuple[RelationLabel, dict[RelationLabel, float]]:
    """Most probable label (ties go to none, next, if in that order) and the label distribution."""
    return re_predict_features(m, pair_features(p, emb, m.config))
