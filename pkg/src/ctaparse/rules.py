"""Hand-written token patterns as an extraction baseline.

Pattern files are line based::

    # comments start with '#'
    @verbs = pass advance insert remove
    [ @verbs * wire ]
    @verbs the [ needle ]

``@name = ...`` defines a word list. A pattern is a sequence of elements:
a literal word (case-insensitive), ``@name`` for any word of a list, or
``*`` for any single token. Square brackets mark the captured part; without
them the whole match is captured.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .datasets import iobes_tags

__all__ = ["RulePattern", "RuleSyntaxError", "load_rules", "parse_rules", "rule_baseline"]


class RuleSyntaxError(ValueError):
    pass


@dataclass(frozen=True)
class Predicate:
    kind: str  # "literal" | "wordlist" | "wildcard"
    words: frozenset[str] = frozenset()

    def matches(self, token: str) -> bool:
        return self.kind == "wildcard" or token.lower() in self.words


@dataclass(frozen=True)
class RulePattern:
    predicates: tuple[Predicate, ...]
    capture: tuple[int, int]
    source: str = ""

    def __post_init__(self):
        s, e = self.capture
        if not 0 <= s < e <= len(self.predicates):
            raise RuleSyntaxError(f"capture range {self.capture} outside pattern of length {len(self.predicates)}")

    def match_at(self, tokens: Sequence[str], i: int) -> bool:
        n = len(self.predicates)
        return i + n <= len(tokens) and all(p.matches(tokens[i + j]) for j, p in enumerate(self.predicates))


def parse_rules(lines: Iterable[str]) -> list[RulePattern]:
    lists: dict[str, frozenset[str]] = {}
    patterns: list[RulePattern] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("@") and "=" in line:
            name, _, words = line.partition("=")
            name = name.strip()[1:]
            if not name or not words.split():
                raise RuleSyntaxError(f"line {lineno}: empty word list definition")
            lists[name] = frozenset(w.lower() for w in words.split())
            continue
        preds: list[Predicate] = []
        cap_start = cap_end = None
        for item in line.replace("[", " [ ").replace("]", " ] ").split():
            if item == "[":
                if cap_start is not None:
                    raise RuleSyntaxError(f"line {lineno}: nested or repeated capture")
                cap_start = len(preds)
            elif item == "]":
                if cap_start is None or cap_end is not None:
                    raise RuleSyntaxError(f"line {lineno}: unbalanced ']'")
                cap_end = len(preds)
            elif item == "*":
                preds.append(Predicate("wildcard"))
            elif item.startswith("@"):
                if item[1:] not in lists:
                    raise RuleSyntaxError(f"line {lineno}: undefined word list {item}")
                preds.append(Predicate("wordlist", lists[item[1:]]))
            else:
                preds.append(Predicate("literal", frozenset([item.lower()])))
        if (cap_start is None) != (cap_end is None):
            raise RuleSyntaxError(f"line {lineno}: unbalanced capture brackets")
        if not preds:
            raise RuleSyntaxError(f"line {lineno}: empty pattern")
        capture = (0, len(preds)) if cap_start is None else (cap_start, cap_end)
        try:
            patterns.append(RulePattern(tuple(preds), capture, line))
        except RuleSyntaxError as exc:
            raise RuleSyntaxError(f"line {lineno}: {exc}") from None
    return patterns


def load_rules(path: str | Path) -> list[RulePattern]:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh)


def rule_baseline(patterns: Sequence[RulePattern], tokens: Sequence[str]) -> list[str]:
    """Tag ``tokens`` with the captures of leftmost-longest pattern matches.

    Scanning resumes after each match, so firings never overlap.
    """
    spans = []
    i = 0
    while i < len(tokens):
        best = None
        for p in patterns:
            if p.match_at(tokens, i) and (best is None or len(p.predicates) > len(best.predicates)):
                best = p
        if best is None:
            i += 1
            continue
        s, e = best.capture
        spans.append((i + s, i + e))
        i += len(best.predicates)
    return iobes_tags(len(tokens), spans)
