"""Synthetic interview corpora with planted spans and relations.

Each document is a transcript plus the protocol a human would have written
for it. Protocol phrases are copied verbatim from planted text spans, so
the gold projection is known exactly.

Two families:

``separable``
    Condition spans start with ``if``; a step's span sits in the sentence
    right after its predecessor's, so the relation of a pair follows from the
    span words and the sentence distance.
``contextual``
    Condition spans use the same words as plain steps. What marks a
    condition is a cue clause elsewhere in its sentence and cue clauses in
    the branch sentences, which only a model that sees context can use.

Word vectors are random unit vectors over the first ``dim - NOISE_DIMS``
coordinates. :data:`NOISE_WORDS` live in the remaining coordinates only, so
any phrase made of them has cosine exactly 0 with every transcript span.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import TextSpan
from .protocol import ProtocolGraph, ProtocolPhrase, RelationLabel

__all__ = [
    "FAMILIES",
    "NOISE_WORDS",
    "FixtureDoc",
    "generate_corpus",
    "generate_embeddings",
    "make_fixtures",
    "scramble_protocol",
]

FAMILIES = ("separable", "contextual")
NOISE_DIMS = 10

VERBS = ["pass", "advance", "insert", "remove", "flush", "inject", "withdraw", "secure", "clean", "prep",
         "palpate", "aspirate", "dilate", "suture", "drape", "tape", "attach", "confirm", "locate", "puncture"]
MODS = ["the", "a", "new", "sterile", "small", "long"]
OBJECTS = ["wire", "needle", "catheter", "sheath", "syringe", "skin", "vein", "artery", "dressing", "hub",
           "port", "guidewire", "dilator", "scalpel", "probe", "gauze", "tubing", "flash", "site", "lumen"]
COND_SUBJ = ["resistance", "blood", "pressure", "flow", "bleeding", "swelling", "pulsation", "pain"]
COND_PRED = ["returns", "drops", "stops", "increases", "appears", "persists", "changes", "occurs"]
FILLER = ["so", "you", "know", "then", "okay", "well", "just", "i", "usually", "basically", "like",
          "right", "yeah", "kind", "of", "and", "we", "would", "do", "that", "there", "now", "sure",
          "it", "um", "uh", "mean", "really", "probably", "maybe"]
QUESTION = ["what", "how", "do", "you", "next", "after", "happens", "when", "then", "is", "there", "anything", "else"]
COND_CUE = ["but", "if", "trouble", "happens", ","]
BRANCH_CUES = [["in", "that", "case"], ["otherwise", "instead"]]
PUNCT = [".", ",", "?"]
# out-of-vocabulary fillers exercise the OOV path of the encoders
OOV_FILLER = ["um", "uh"]

NOISE_WORDS = ["zorblat", "quenxit", "vapromel", "druskin", "fennolux", "glarvitch", "omptrel", "skivvane",
               "trobulin", "yexmara", "plunkett", "wizzendor", "crallow", "mibbrant", "joskelp", "harnuvo"]


@dataclass
class FixtureDoc:
    id: str
    lines: list[tuple[int, str, list[str]]]
    protocol: ProtocolGraph
    gold: dict[str, TextSpan]
    phrase_lines: dict[str, list[int]] = field(default_factory=dict)

    def transcript_text(self) -> str:
        return "".join(f"{no}: [{spk}] {' '.join(toks)}\n" for no, spk, toks in self.lines)

    def protocol_text(self) -> str:
        out = []
        depth = {p.id: (0 if p.id.isdigit() else 1) for p in self.protocol.phrases}
        for p in self.protocol.phrases:
            lines = self.phrase_lines[p.id]
            if len(lines) == 1:
                ann = f" (line {lines[0]})"
            else:
                ann = f" (lines {lines[0]}-{lines[-1]})"
            colon = ":" if p.text.lower().startswith("if ") else ""
            out.append(f"{'  ' * depth[p.id]}{p.id}. {p.text}{ann}{colon}\n")
        return "".join(out)

    def annotation_records(self) -> list[dict]:
        recs = []
        for p in self.protocol.phrases:
            s = self.gold[p.id]
            recs.append({"phrase_id": p.id, "gold_span": {"doc": self.id, "sent_index": s.sent_index, "start": s.start, "end": s.end}, "note": ""})
        for u, v, lbl in self.protocol.edges:
            recs.append({"u_phrase": u, "v_phrase": v, "label": RelationLabel(lbl).value})
        return recs


class _DocBuilder:
    def __init__(self, rng: random.Random, doc_id: str):
        self.rng = rng
        self.id = doc_id
        self.lines: list[tuple[int, str, list[str]]] = []
        self.line_no = rng.randint(1, 5)

    def _push(self, speaker: str, tokens: list[str]) -> int:
        tokens = list(tokens)
        if tokens and tokens[0] not in PUNCT:
            tokens[0] = tokens[0].capitalize()
        self.lines.append((self.line_no, speaker, tokens))
        idx = len(self.lines) - 1
        self.line_no += 1
        return idx

    def filler(self, lo=3, hi=8) -> list[str]:
        return [self.rng.choice(FILLER) for _ in range(self.rng.randint(lo, hi))]

    def question(self) -> int:
        toks = [self.rng.choice(QUESTION) for _ in range(self.rng.randint(3, 6))] + ["?"]
        return self._push("I", toks)

    def filler_sentence(self) -> int:
        return self._push("S", self.filler() + ["."])

    def span_sentence(self, span: list[str], prefix: list[str] = (), suffix: list[str] = ()) -> tuple[int, TextSpan]:
        pre = list(prefix) + self.filler(0, 3)
        post = list(suffix) + self.filler(0, 3) + ["."]
        idx = self._push("S", pre + span + post)
        return idx, TextSpan(idx, len(pre), len(pre) + len(span))


def _step_span(rng: random.Random, used: set[tuple[str, ...]]) -> list[str]:
    while True:
        span = [rng.choice(VERBS)]
        if rng.random() < 0.5:
            span.append(rng.choice(MODS))
        span.append(rng.choice(OBJECTS))
        if tuple(span) not in used:
            used.add(tuple(span))
            return span


def _cond_span(rng: random.Random) -> list[str]:
    return ["if", rng.choice(COND_SUBJ), rng.choice(COND_PRED)]


def _generate_doc(rng: random.Random, doc_id: str, family: str) -> FixtureDoc:
    b = _DocBuilder(rng, doc_id)
    n_steps = rng.randint(5, 8)
    cond_at = rng.randint(2, n_steps - 1) if rng.random() < 0.7 else None

    b.question()
    b.filler_sentence()
    phrases: list[ProtocolPhrase] = []
    gold: dict[str, TextSpan] = {}
    edges: list[tuple[str, str, RelationLabel]] = []
    used: set[tuple[str, ...]] = set()
    prev_tail = None

    def add(pid: str, text: str, span: TextSpan):
        phrases.append(ProtocolPhrase(pid, text, frozenset()))
        gold[pid] = span

    for step in range(1, n_steps + 1):
        pid = str(step)
        if step == cond_at:
            if family == "separable":
                toks = _cond_span(rng)
                _, span = b.span_sentence(toks)
                add(pid, " ".join(toks), span)
            else:
                toks = _step_span(rng, used)
                _, span = b.span_sentence(toks, prefix=COND_CUE)
                add(pid, "if " + " ".join(toks), span)
            if prev_tail:
                edges.append((prev_tail, pid, RelationLabel.NEXT))
            tails = []
            for bi, letter in enumerate("ab"):
                if bi:
                    b.filler_sentence()
                btoks = _step_span(rng, used)
                cue = BRANCH_CUES[bi] + [","] if family == "contextual" else []
                _, bspan = b.span_sentence(btoks, prefix=cue)
                bid = pid + letter
                add(bid, " ".join(btoks), bspan)
                edges.append((pid, bid, RelationLabel.IF))
                tails.append(bid)
            prev_tail = tails[-1]
        else:
            toks = _step_span(rng, used)
            _, span = b.span_sentence(toks)
            add(pid, " ".join(toks), span)
            if prev_tail:
                edges.append((prev_tail, pid, RelationLabel.NEXT))
            prev_tail = pid
    b.question()
    b.filler_sentence()

    # source-line annotations: exact line, or a noisy range around it
    phrase_lines = {}
    final = []
    for p in phrases:
        idx = gold[p.id].sent_index
        if rng.random() < 0.5:
            lo, hi = max(0, idx - rng.randint(0, 1)), min(len(b.lines) - 1, idx + rng.randint(0, 1))
        else:
            lo = hi = idx
        nos = [b.lines[i][0] for i in range(lo, hi + 1)]
        phrase_lines[p.id] = [nos[0], nos[-1]] if len(nos) > 1 else nos
        final.append(ProtocolPhrase(p.id, p.text, frozenset(range(nos[0], nos[-1] + 1))))
    return FixtureDoc(doc_id, b.lines, ProtocolGraph(final, edges), gold, phrase_lines)


def generate_corpus(n_docs: int, seed: int, family: str = "separable") -> list[FixtureDoc]:
    if family not in FAMILIES:
        raise ValueError(f"unknown fixture family {family!r}; expected one of {FAMILIES}")
    rng = random.Random(f"{family}:{seed}")
    return [_generate_doc(rng, f"doc{i:03d}", family) for i in range(n_docs)]


def fixture_vocabulary() -> list[str]:
    words = VERBS + MODS + OBJECTS + COND_SUBJ + COND_PRED + FILLER + QUESTION + COND_CUE + PUNCT
    words += [w for cue in BRANCH_CUES for w in cue] + ["if"]
    seen = []
    for w in words:
        if w not in seen and w not in OOV_FILLER:
            seen.append(w)
    return seen


def generate_embeddings(seed: int, dim: int = 50) -> dict[str, np.ndarray]:
    """Unit vectors: fixture words in the leading coordinates, noise words in the last ``NOISE_DIMS``."""
    if dim <= NOISE_DIMS + 1:
        raise ValueError(f"dim must exceed {NOISE_DIMS + 1}")
    rng = np.random.default_rng(seed)
    out: dict[str, np.ndarray] = {}
    for w in fixture_vocabulary():
        v = np.zeros(dim)
        v[: dim - NOISE_DIMS] = rng.normal(size=dim - NOISE_DIMS)
        out[w] = v / np.linalg.norm(v)
    for w in NOISE_WORDS:
        v = np.zeros(dim)
        v[dim - NOISE_DIMS:] = np.abs(rng.normal(size=NOISE_DIMS)) + 0.1
        out[w] = v / np.linalg.norm(v)
    return out


def format_embeddings(vectors: dict[str, np.ndarray]) -> str:
    return "".join(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n" for w, v in vectors.items())


def scramble_protocol(g: ProtocolGraph, seed: int) -> ProtocolGraph:
    """Same graph with every phrase text replaced by noise words orthogonal to the transcript vocabulary."""
    rng = random.Random(seed)
    phrases = []
    for p in g.phrases:
        words = [rng.choice(NOISE_WORDS) for _ in range(rng.randint(2, 4))]
        phrases.append(ProtocolPhrase(p.id, " ".join(words), p.source_lines))
    return ProtocolGraph(phrases, list(g.edges))


RULES = """\
# hand-written extraction patterns for the bundled fixtures
@verbs = {verbs}
@mods = {mods}
@objects = {objects}
[ @verbs @objects ]
[ @verbs @mods @objects ]
"""


def make_fixtures(out: str | Path, n_docs: int = 30, seed: int = 13, family: str = "separable", dim: int = 50) -> list[FixtureDoc]:
    """Write transcripts, protocols, annotations, vectors and rules under ``out``."""
    out = Path(out)
    docs = generate_corpus(n_docs, seed, family)
    for sub in ("transcripts", "protocols", "gold"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    for d in docs:
        (out / "transcripts" / f"{d.id}.txt").write_text(d.transcript_text(), encoding="utf-8")
        (out / "protocols" / f"{d.id}.txt").write_text(d.protocol_text(), encoding="utf-8")
        (out / "gold" / f"{d.id}.jsonl").write_text(
            "".join(json.dumps(r, sort_keys=True) + "\n" for r in d.annotation_records()), encoding="utf-8")
    (out / "embeddings.txt").write_text(format_embeddings(generate_embeddings(seed, dim)), encoding="utf-8")
    (out / "rules.txt").write_text(
        RULES.format(verbs=" ".join(VERBS), mods=" ".join(MODS), objects=" ".join(OBJECTS)), encoding="utf-8")
    (out / "fixtures.json").write_text(
        json.dumps({"family": family, "seed": seed, "n_docs": n_docs, "dim": dim}, sort_keys=True) + "\n", encoding="utf-8")
    return docs
