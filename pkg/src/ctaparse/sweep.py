"""Context-level and sampling-portion ablation grid for the relation model.

Every cell trains one relation classifier per seed on the (sampled) pairs of
the training documents and scores it on the held-out documents. Results are
aggregated into mean and sample std per cell.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import Transcript
from .datasets import PairExample, SamplingPortion, build_pair_dataset, make_pair, sample_labels
from .embeddings import EmbeddingTable
from .evaluation import ManualAnnotation, aggregate_runs, format_table, pm, relation_metrics
from .matcher import MatchedGraph
from .protocol import RelationLabel
from .relation import PoolingMode, ReConfig, featurize, re_train

__all__ = [
    "SweepResult",
    "check_monotone",
    "gold_pairs",
    "run_sweep",
    "summarize",
    "sweep_table",
]

log = logging.getLogger(__name__)

METRICS = ("accuracy", "micro_f1", "next_f1", "if_f1")
POOLING_NAMES = {
    PoolingMode.MASKED_MAX: "MaskMAX",
    PoolingMode.MASKED_AVG: "MaskAVG",
    PoolingMode.UNMASKED_AVG: "AVG",
}


@dataclass(frozen=True)
class SweepResult:
    pooling: str
    k: int
    portion: str
    seed: int
    test_set: str
    accuracy: float
    micro_f1: float
    next_f1: float
    if_f1: float

    def to_json(self) -> dict:
        return dict(self.__dict__)


def gold_pairs(ann: ManualAnnotation, t: Transcript, k: int) -> list[PairExample]:
    """Every ordered pair of annotated (non-noisy) phrases, labeled from the annotation."""
    ids = [pid for pid, s in ann.spans.items() if s is not None]
    out = []
    for a in ids:
        for b in ids:
            if a != b:
                label = ann.relations.get((a, b), RelationLabel.NONE)
                out.append(make_pair(t, ann.spans[a], ann.spans[b], k, label, a, b))
    return out


def _score(model, X: np.ndarray, gold: Sequence[RelationLabel]) -> dict[str, float]:
    pred = [model.labels[i] for i in np.argmax(model.scores(X), axis=1)] if len(X) else []
    rm = relation_metrics(gold, pred)
    return {"accuracy": rm.accuracy, "micro_f1": rm.micro_f1, "next_f1": rm.f1["next"], "if_f1": rm.f1["if"]}


def run_sweep(
    matched: Mapping[str, tuple[MatchedGraph, Transcript]],
    emb: EmbeddingTable,
    train_docs: Sequence[str],
    test_docs: Sequence[str],
    ks: Sequence[int] = (0, 1, 2, 3),
    portions: Sequence[str] = ("6:3:1", "4:2:1", "1:1:1"),
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    poolings: Sequence[str] = ("masked-max",),
    annotations: Mapping[str, ManualAnnotation] | None = None,
    l2: float = 1.0,
    lr: float = 0.5,
    epochs: int = 200,
) -> list[SweepResult]:
    """Train and score one model per (pooling, K, portion, seed).

    The ``generated`` test set is the weakly-labeled pairs of ``test_docs``;
    with ``annotations`` the ``manual`` test set uses the annotated spans and
    relations of the same documents.
    """
    out: list[SweepResult] = []
    for k in ks:
        train = [p for d in train_docs for p in build_pair_dataset(*matched[d], k)]
        tests = {"generated": [p for d in test_docs for p in build_pair_dataset(*matched[d], k)]}
        if annotations:
            tests["manual"] = [p for d in test_docs if d in annotations for p in gold_pairs(annotations[d], matched[d][1], k)]
        for pooling in poolings:
            cfg = ReConfig(pooling=pooling, k=k)
            feats = {name: (featurize(ps, emb, cfg), [p.label for p in ps]) for name, ps in tests.items()}
            for portion in portions:
                por = SamplingPortion.parse(portion)
                for seed in seeds:
                    data = sample_labels(train, por, seed)
                    model, _ = re_train(data, emb, cfg, l2=l2, lr=lr, epochs=epochs, seed=seed)
                    for name, (X, gold) in feats.items():
                        s = _score(model, X, gold)
                        out.append(SweepResult(cfg.pooling.value, k, str(por), seed, name, **s))
                    log.info("sweep %s K=%d %s seed=%d done", cfg.pooling.value, k, por, seed)
    return out


def summarize(results: Sequence[SweepResult]) -> list[dict]:
    """Mean and sample std of every metric per (test set, pooling, portion, K) cell."""
    cells: dict[tuple, list[SweepResult]] = {}
    for r in results:
        cells.setdefault((r.test_set, r.pooling, r.portion, r.k), []).append(r)
    rows = []
    for (test_set, pooling, portion, k), rs in cells.items():
        row = {"test_set": test_set, "pooling": pooling, "portion": portion, "k": k, "runs": len(rs)}
        for m in METRICS:
            row[m], row[m + "_std"] = aggregate_runs([getattr(r, m) for r in rs])
        rows.append(row)
    return rows


def sweep_table(summary: Sequence[dict]) -> str:
    """One block per sampling portion; rows are model/K settings, descending K, columns per test set."""
    sets = sorted({r["test_set"] for r in summary}, key=lambda s: (s != "generated", s))
    by = {(r["test_set"], r["pooling"], r["portion"], r["k"]): r for r in summary}
    keys = sorted({(r["portion"], r["pooling"], r["k"]) for r in summary},
                  key=lambda x: (-SamplingPortion.parse(x[0]).none_w, x[1], -x[2]))
    headers = ["Setting"] + [f"{s} {m}" for s in sets for m in ("Accuracy", "Micro F1", "<next> F1", "<if> F1")]
    blocks = []
    for portion in dict.fromkeys(k[0] for k in keys):
        rows = []
        for _, pooling, k in (x for x in keys if x[0] == portion):
            name = POOLING_NAMES.get(PoolingMode(pooling), pooling)
            row = [f"{name} K={k}"]
            for s in sets:
                r = by.get((s, pooling, portion, k))
                row += ["-"] * 4 if r is None else [pm(r[m], r[m + "_std"]) for m in METRICS]
            rows.append(row)
        blocks.append(format_table(headers, rows, title=f"Sampling portion {portion}"))
    return "\n".join(blocks)


def check_monotone(
    summary: Sequence[dict], pooling: str = "unmasked-avg", test_set: str = "generated", k_hi: int = 2, k_lo: int = 0
) -> list[str]:
    """Cells where micro-F1 at ``k_hi`` does not strictly exceed ``k_lo``; empty means the check passes.

    Only ``pooling`` is checked. The masked modes never see context tokens,
    so with static vectors they have no reason to improve with K.
    """
    by = {(r["test_set"], r["pooling"], r["portion"], r["k"]): r["micro_f1"] for r in summary}
    failures = []
    for (s, pool, portion, k), f in sorted(by.items()):
        if s != test_set or k != k_hi or pool != PoolingMode(pooling).value:
            continue
        lo = by.get((s, pool, portion, k_lo))
        if lo is None:
            continue
        if not f > lo:
            failures.append(f"{pool} {portion}: K={k_hi} micro-F1 {f:.4f} <= K={k_lo} {lo:.4f}")
    return failures
