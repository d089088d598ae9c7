"""Transcripts: loading, tokenization and span addressing.

Transcript files hold one numbered, speaker-tagged line per sentence::

    12: [I] And what comes next?
    14: [S] You pass the wire.

Line numbers are the ones printed in the source document and only need to
increase; ``sent_index`` is the 0-based ordinal used everywhere else.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, TextIO

__all__ = [
    "FormatError",
    "SpanError",
    "TextSpan",
    "Transcript",
    "TranscriptLine",
    "enumerate_spans",
    "load_transcript",
    "read_transcript",
    "render_transcript",
    "span_from_json",
    "span_text",
    "span_to_json",
    "tokenize",
]


class FormatError(ValueError):
    """Input text does not follow the expected file format."""


class SpanError(IndexError):
    """A span does not address valid tokens of a transcript."""


_TOKEN_RE = re.compile(r"\w+(?:[-'’]\w+)*|[^\w\s]")
_LINE_RE = re.compile(r"^\s*(\d+)\s*:\s*\[([^\]]*)\]\s?(.*)$")


def tokenize(text: str) -> list[str]:
    """Split on whitespace and detach punctuation.

    Hyphens and apostrophes between word characters stay inside the token,
    so ``"Luer-lock"`` and ``"don't"`` are single tokens. Case is preserved.

    >>> tokenize("pass wire.")
    ['pass', 'wire', '.']
    """
    return _TOKEN_RE.findall(text)


@dataclass(frozen=True)
class TranscriptLine:
    line_no: int
    speaker: str
    tokens: tuple[str, ...]
    sent_index: int

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class Transcript:
    id: str
    lines: tuple[TranscriptLine, ...]

    def __post_init__(self):
        prev = None
        for i, line in enumerate(self.lines):
            if line.sent_index != i:
                raise FormatError(f"{self.id}: line {line.line_no} has sent_index {line.sent_index}, expected {i}")
            if prev is not None and line.line_no <= prev:
                raise FormatError(f"{self.id}: line number {line.line_no} does not increase (previous {prev})")
            prev = line.line_no
        object.__setattr__(self, "_by_line_no", {ln.line_no: ln.sent_index for ln in self.lines})

    def __len__(self) -> int:
        return len(self.lines)

    def __getitem__(self, sent_index: int) -> TranscriptLine:
        return self.lines[sent_index]

    def index_of_line(self, line_no: int) -> int | None:
        """Sentence index of a printed line number, or None if absent."""
        return self._by_line_no.get(line_no)


@dataclass(frozen=True, order=True)
class TextSpan:
    """Half-open token range ``[start, end)`` inside one sentence."""

    sent_index: int
    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise SpanError(f"invalid span bounds ({self.start}, {self.end})")
        if self.sent_index < 0:
            raise SpanError(f"negative sentence index {self.sent_index}")

    def __len__(self) -> int:
        return self.end - self.start


def load_transcript(source: TextIO | Iterable[str], doc_id: str = "doc") -> Transcript:
    """Parse ``<line_no>: [<speaker>] <text>`` lines into a :class:`Transcript`.

    Blank lines are skipped. Raises :class:`FormatError` naming the physical
    line position on malformed input or non-increasing line numbers.
    """
    lines: list[TranscriptLine] = []
    prev_no = None
    for pos, raw in enumerate(source, start=1):
        raw = raw.rstrip("\r\n")
        if not raw.strip():
            continue
        m = _LINE_RE.match(raw)
        if m is None:
            raise FormatError(f"{doc_id}:{pos}: cannot parse transcript line {raw!r}")
        line_no = int(m.group(1))
        if line_no <= 0:
            raise FormatError(f"{doc_id}:{pos}: line numbers must be positive")
        if prev_no is not None and line_no == prev_no:
            raise FormatError(f"{doc_id}:{pos}: duplicate line number {line_no}")
        if prev_no is not None and line_no < prev_no:
            raise FormatError(f"{doc_id}:{pos}: line number {line_no} after {prev_no}")
        prev_no = line_no
        lines.append(TranscriptLine(line_no, m.group(2).strip(), tuple(tokenize(m.group(3))), len(lines)))
    return Transcript(doc_id, tuple(lines))


def read_transcript(path: str | Path) -> Transcript:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        return load_transcript(fh, doc_id=path.stem)


def render_transcript(t: Transcript) -> str:
    return "".join(f"{ln.line_no}: [{ln.speaker}] {ln.text}\n" for ln in t.lines)


def enumerate_spans(line: TranscriptLine, min_len: int, max_len: int) -> list[TextSpan]:
    """All contiguous spans of ``line`` with length in ``[min_len, max_len]``.

    Ordered by ``(start, end)``.
    """
    if not 1 <= min_len <= max_len:
        raise ValueError(f"need 1 <= min_len <= max_len, got {min_len}, {max_len}")
    n = len(line.tokens)
    return [
        TextSpan(line.sent_index, start, end)
        for start in range(n)
        for end in range(start + min_len, min(start + max_len, n) + 1)
    ]


def check_span(t: Transcript, s: TextSpan) -> None:
    if s.sent_index >= len(t.lines) or s.end > len(t.lines[s.sent_index].tokens):
        raise SpanError(f"span {s} out of bounds for transcript {t.id!r}")


def span_tokens(t: Transcript, s: TextSpan) -> tuple[str, ...]:
    check_span(t, s)
    return t.lines[s.sent_index].tokens[s.start:s.end]


def span_text(t: Transcript, s: TextSpan) -> str:
    return " ".join(span_tokens(t, s))


def span_to_json(s: TextSpan, doc: str) -> dict:
    return {"doc": doc, "sent_index": s.sent_index, "start": s.start, "end": s.end}


def span_from_json(obj: dict) -> tuple[str, TextSpan]:
    return obj["doc"], TextSpan(int(obj["sent_index"]), int(obj["start"]), int(obj["end"]))
