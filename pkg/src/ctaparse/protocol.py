"""Protocol files to phrase graphs.

Grammar (one step per line, two spaces of indentation per level)::

    1. prep the patient (lines 8-9)
    2. pass wire (line 14)
    3. if resistance is felt (line 20):
      3a. remove the wire (line 21)
      3b. advance (line 22)
    4. flush the line

Top-level ids are integers; a nested step extends its parent's id
(``3a`` under ``3``, ``3a1`` under ``3a``). A step whose text starts with
``if`` is a condition: each child is a branch head reached by an ``if``
edge. Children of a plain step form a sub-sequence entered by a ``next``
edge from the parent. Consecutive siblings are joined by ``next``; when a
block closes, the following sibling is joined from the block's tail (for a
condition, the tail of its last branch).

Lines are lexed into a token stream (INDENT, ID, TEXT, ANNOT, COLON, EOL)
that drives a deterministic automaton. Transition table, where ``-`` marks
a parse error::

    state          INDENT        ID            TEXT     ANNOT          COLON          EOL
    EXPECT_STEP    EXPECT_STEP   IN_STEP       -        -              -              EXPECT_STEP
    IN_BRANCH      IN_BRANCH     IN_STEP       -        -              -              IN_BRANCH
    IN_STEP        -             -             IN_STEP  IN_ANNOTATION  IN_ANNOTATION  EXPECT_STEP | IN_BRANCH
    IN_ANNOTATION  -             -             -        -              IN_ANNOTATION  EXPECT_STEP | IN_BRANCH

EOL leaves a step line in IN_BRANCH when the step was a condition, else in
EXPECT_STEP. An ID read from IN_BRANCH at a deeper level emits ``if`` edges.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, TextIO

__all__ = [
    "ProtocolGraph",
    "ProtocolParseError",
    "ProtocolPhrase",
    "RelationLabel",
    "State",
    "graph_from_json",
    "graph_to_json",
    "is_condition",
    "parse_protocol",
    "read_protocol",
    "validate_graph",
]


class ProtocolParseError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class RelationLabel(str, enum.Enum):
    NONE = "none"
    NEXT = "next"
    IF = "if"

    @classmethod
    def order(cls) -> tuple["RelationLabel", ...]:
        return (cls.NONE, cls.NEXT, cls.IF)


@dataclass(frozen=True)
class ProtocolPhrase:
    id: str
    text: str
    source_lines: frozenset[int] = frozenset()


@dataclass
class ProtocolGraph:
    phrases: list[ProtocolPhrase] = field(default_factory=list)
    edges: list[tuple[str, str, RelationLabel]] = field(default_factory=list)

    def phrase(self, pid: str) -> ProtocolPhrase:
        for p in self.phrases:
            if p.id == pid:
                return p
        raise KeyError(pid)

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.phrases]


class State(enum.Enum):
    EXPECT_STEP = "EXPECT_STEP"
    IN_STEP = "IN_STEP"
    IN_ANNOTATION = "IN_ANNOTATION"
    IN_BRANCH = "IN_BRANCH"


class Tok(enum.Enum):
    INDENT = "INDENT"
    ID = "ID"
    TEXT = "TEXT"
    ANNOT = "ANNOT"
    COLON = "COLON"
    EOL = "EOL"


_TRANSITIONS: dict[tuple[State, Tok], State] = {
    (State.EXPECT_STEP, Tok.INDENT): State.EXPECT_STEP,
    (State.EXPECT_STEP, Tok.ID): State.IN_STEP,
    (State.EXPECT_STEP, Tok.EOL): State.EXPECT_STEP,
    (State.IN_BRANCH, Tok.INDENT): State.IN_BRANCH,
    (State.IN_BRANCH, Tok.ID): State.IN_STEP,
    (State.IN_BRANCH, Tok.EOL): State.IN_BRANCH,
    (State.IN_STEP, Tok.TEXT): State.IN_STEP,
    (State.IN_STEP, Tok.ANNOT): State.IN_ANNOTATION,
    (State.IN_STEP, Tok.COLON): State.IN_ANNOTATION,
    (State.IN_ANNOTATION, Tok.COLON): State.IN_ANNOTATION,
    # EOL out of IN_STEP / IN_ANNOTATION depends on the step kind (parse_protocol)
}

_HEAD_RE = re.compile(r"^( *)(\S+?)\.(?:\s+|$)(.*)$")
_ID_RE = re.compile(r"^\d+(?:[a-z]+\d*)*$")
_ANNOT_RE = re.compile(r"\(\s*(lines?\b[^()]*)\)\s*(:?)\s*$", re.IGNORECASE)
_LINES_RE = re.compile(r"^(line)\s+(\d+)$|^(lines)\s+(\d+)\s*-\s*(\d+)$", re.IGNORECASE)
_COND_RE = re.compile(r"^if\b", re.IGNORECASE)


def is_condition(text: str) -> bool:
    return bool(_COND_RE.match(text.strip()))


def _parse_lines(body: str, lineno: int) -> frozenset[int]:
    m = _LINES_RE.match(body.strip())
    if m is None:
        raise ProtocolParseError(lineno, f"malformed line annotation ({body})")
    if m.group(1):
        return frozenset([int(m.group(2))])
    lo, hi = int(m.group(4)), int(m.group(5))
    if hi < lo:
        raise ProtocolParseError(lineno, f"malformed line annotation ({body}): range is reversed")
    return frozenset(range(lo, hi + 1))


def _lex_line(raw: str, lineno: int) -> list[tuple[Tok, object]]:
    if not raw.strip():
        return [(Tok.EOL, None)]
    if "\t" in raw[: len(raw) - len(raw.lstrip())]:
        raise ProtocolParseError(lineno, "tabs are not allowed in indentation")
    m = _HEAD_RE.match(raw.rstrip())
    if m is None:
        raise ProtocolParseError(lineno, f"expected a numbered step, got {raw.strip()!r}")
    indent, sid, rest = m.groups()
    if len(indent) % 2:
        raise ProtocolParseError(lineno, "indentation must be a multiple of two spaces")
    if not _ID_RE.match(sid):
        raise ProtocolParseError(lineno, f"invalid step id {sid!r}")
    toks: list[tuple[Tok, object]] = [(Tok.INDENT, len(indent) // 2), (Tok.ID, sid)]
    rest = rest.strip()
    colon = False
    annot = None
    am = _ANNOT_RE.search(rest)
    if am is not None:
        annot = am.group(1)
        colon = bool(am.group(2))
        rest = rest[: am.start()].rstrip()
    elif "(line" in rest.lower():
        raise ProtocolParseError(lineno, "malformed line annotation")
    if rest.endswith(":"):
        rest = rest[:-1].rstrip()
        colon = True
    if not rest:
        raise ProtocolParseError(lineno, f"step {sid} has no text")
    toks.append((Tok.TEXT, rest))
    if annot is not None:
        toks.append((Tok.ANNOT, annot))
    if colon:
        toks.append((Tok.COLON, None))
    toks.append((Tok.EOL, None))
    return toks


@dataclass
class _Block:
    """An open step and the tail(s) its following sibling attaches to."""

    phrase_id: str
    depth: int
    condition: bool
    tail: str
    children: int = 0


class _Builder:
    def __init__(self):
        self.graph = ProtocolGraph()
        self.seen: set[str] = set()
        self.stack: list[_Block] = []

    def _link(self, src: str, dst: str, label: RelationLabel) -> None:
        if src != dst:
            self.graph.edges.append((src, dst, label))

    def _close_to(self, depth: int) -> str | None:
        """Pop blocks deeper than ``depth`` and return the tail to join from."""
        tail = None
        while self.stack and self.stack[-1].depth > depth:
            blk = self.stack.pop()
            tail = blk.tail
            if self.stack:
                # for a condition this keeps only the last branch's tail
                self.stack[-1].tail = tail
        return tail

    def add(self, sid: str, depth: int, text: str, lines: frozenset[int], lineno: int) -> None:
        if sid in self.seen:
            raise ProtocolParseError(lineno, f"duplicate step id {sid!r}")
        cur_depth = self.stack[-1].depth if self.stack else -1
        if depth > cur_depth + 1:
            raise ProtocolParseError(lineno, f"indentation jumps from level {max(cur_depth, 0)} to {depth}")
        if depth == 0 and not sid.isdigit():
            raise ProtocolParseError(lineno, f"unknown step reference {sid!r}: top-level ids are integers")

        if not self.stack:
            pass
        elif depth == cur_depth + 1:
            parent = self.stack[-1]
            if not sid.startswith(parent.phrase_id) or sid == parent.phrase_id:
                raise ProtocolParseError(lineno, f"unknown step reference {sid!r} under step {parent.phrase_id!r}")
            if parent.condition:
                self._link(parent.phrase_id, sid, RelationLabel.IF)
            elif parent.children == 0:
                self._link(parent.phrase_id, sid, RelationLabel.NEXT)
            parent.children += 1
        else:
            # sibling at `depth`: close deeper blocks, then the sibling itself
            self._close_to(depth)
            prev = self.stack.pop()
            parent = self.stack[-1] if self.stack else None
            if parent is not None and not sid.startswith(parent.phrase_id):
                raise ProtocolParseError(lineno, f"unknown step reference {sid!r} under step {parent.phrase_id!r}")
            if parent is not None and parent.condition:
                self._link(parent.phrase_id, sid, RelationLabel.IF)
                parent.children += 1
            else:
                self._link(prev.tail, sid, RelationLabel.NEXT)
                if parent is not None:
                    parent.children += 1

        self.seen.add(sid)
        cond = is_condition(text)
        self.graph.phrases.append(ProtocolPhrase(sid, text, lines))
        self.stack.append(_Block(sid, depth, cond, sid))


def parse_protocol(source: TextIO | Iterable[str]) -> ProtocolGraph:
    """Parse protocol text into a :class:`ProtocolGraph`.

    Raises :class:`ProtocolParseError` naming the offending line.
    """
    b = _Builder()
    state = State.EXPECT_STEP
    for lineno, raw in enumerate(source, start=1):
        raw = raw.rstrip("\r\n")
        depth = 0
        sid = text = None
        lines: frozenset[int] = frozenset()
        for tok, val in _lex_line(raw, lineno):
            if tok is Tok.EOL and state in (State.IN_STEP, State.IN_ANNOTATION):
                b.add(sid, depth, text, lines, lineno)
                state = State.IN_BRANCH if is_condition(text) else State.EXPECT_STEP
                continue
            nxt = _TRANSITIONS.get((state, tok))
            if nxt is None:
                raise ProtocolParseError(lineno, f"unexpected {tok.value} in state {state.value}")
            if tok is Tok.INDENT:
                depth = val
            elif tok is Tok.ID:
                sid = val
            elif tok is Tok.TEXT:
                text = val
            elif tok is Tok.ANNOT:
                lines = _parse_lines(val, lineno)
            state = nxt
    return b.graph


def read_protocol(path: str | Path) -> ProtocolGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_protocol(fh)


def validate_graph(g: ProtocolGraph) -> list[str]:
    """Diagnostics for dangling edges, ``next`` cycles and unanchored phrases."""
    out: list[str] = []
    ids = set(g.ids)
    for src, dst, label in g.edges:
        for end in (src, dst):
            if end not in ids:
                out.append(f"dangling edge {src}->{dst} ({RelationLabel(label).value}): unknown phrase {end!r}")
        if src == dst:
            out.append(f"self-loop on {src!r}")

    succ: dict[str, list[str]] = {}
    for src, dst, label in g.edges:
        if RelationLabel(label) is RelationLabel.NEXT and src in ids and dst in ids:
            succ.setdefault(src, []).append(dst)
    # iterative DFS, report each cycle once by its smallest member ordering
    color = {pid: 0 for pid in g.ids}
    reported: set[frozenset[str]] = set()
    for root in g.ids:
        if color[root]:
            continue
        stack = [(root, iter(succ.get(root, ())))]
        path = [root]
        color[root] = 1
        while stack:
            node, it = stack[-1]
            for nxt in it:
                if color[nxt] == 0:
                    color[nxt] = 1
                    path.append(nxt)
                    stack.append((nxt, iter(succ.get(nxt, ()))))
                    break
                if color[nxt] == 1:
                    cyc = path[path.index(nxt):]
                    key = frozenset(cyc)
                    if key not in reported:
                        reported.add(key)
                        out.append("next cycle: " + " -> ".join(cyc + [nxt]))
            else:
                color[node] = 2
                stack.pop()
                path.pop()

    for p in g.phrases:
        if not p.source_lines:
            out.append(f"unanchored phrase {p.id!r}: no line annotation")
    return out


def graph_to_json(g: ProtocolGraph) -> dict:
    return {
        "phrases": [{"id": p.id, "text": p.text, "lines": sorted(p.source_lines)} for p in g.phrases],
        "edges": [[s, d, RelationLabel(lbl).value] for s, d, lbl in g.edges],
    }


def graph_from_json(obj: dict) -> ProtocolGraph:
    return ProtocolGraph(
        [ProtocolPhrase(p["id"], p["text"], frozenset(p.get("lines", ()))) for p in obj["phrases"]],
        [(s, d, RelationLabel(lbl)) for s, d, lbl in obj["edges"]],
    )


def dumps_graph(g: ProtocolGraph) -> str:
    """Canonical serialization: sorted keys, no whitespace variation."""
    return json.dumps(graph_to_json(g), sort_keys=True, separators=(",", ":"))
