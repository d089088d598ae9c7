import io

import pytest
from hypothesis import given, strategies as st

from ctaparse.protocol import (
    ProtocolGraph,
    ProtocolParseError,
    ProtocolPhrase,
    RelationLabel,
    dumps_graph,
    graph_from_json,
    graph_to_json,
    is_condition,
    parse_protocol,
    validate_graph,
)

N, IF = RelationLabel.NEXT, RelationLabel.IF


def parse(text):
    return parse_protocol(io.StringIO(text))


def test_two_step_chain():
    g = parse("1. prep the patient (lines 8-9)\n2. pass wire (line 14)")
    assert g.ids == ["1", "2"]
    assert g.edges == [("1", "2", N)]
    assert g.phrase("1").source_lines == {8, 9}
    assert g.phrase("2").source_lines == {14}
    assert g.phrase("1").text == "prep the patient"


def test_condition_branches():
    g = parse("3. if resistance is felt (line 20):\n  3a. remove the wire (line 21)\n  3b. advance (line 22)")
    assert g.edges == [("3", "3a", IF), ("3", "3b", IF)]
    assert g.phrase("3").text == "if resistance is felt"


def test_malformed_annotation():
    with pytest.raises(ProtocolParseError, match="line 1"):
        parse("1. step (lines 9-)")


def test_indentation_jump():
    with pytest.raises(ProtocolParseError, match="line 2"):
        parse("1. step\n    1a1. too deep")


def test_unknown_step_reference():
    with pytest.raises(ProtocolParseError, match="line 2"):
        parse("1. step\n  2a. child of a step that is not its parent")


def test_join_after_branches():
    g = parse(
        "1. start (line 1)\n"
        "2. if bleeding (line 2):\n"
        "  2a. press (line 3)\n"
        "  2b. call for help (line 4)\n"
        "3. finish (line 5)\n"
    )
    assert g.edges == [("1", "2", N), ("2", "2a", IF), ("2", "2b", IF), ("2b", "3", N)]


def test_plain_parent_enters_subsequence():
    g = parse("1. prepare\n  1a. wash\n  1b. dry\n2. go")
    assert g.edges == [("1", "1a", N), ("1a", "1b", N), ("1b", "2", N)]


def test_nested_condition_tail_joins():
    g = parse("1. if a:\n  1a. x\n  1b. if b:\n    1b1. y\n2. z")
    assert ("1", "1a", IF) in g.edges and ("1", "1b", IF) in g.edges
    assert ("1b", "1b1", IF) in g.edges
    assert g.edges[-1] == ("1b1", "2", N)


@given(st.integers(min_value=1, max_value=40))
def test_linear_protocol_edge_count(n):
    g = parse("".join(f"{i}. step {i} (line {i})\n" for i in range(1, n + 1)))
    assert len(g.edges) == n - 1
    assert all(lbl is N for _, _, lbl in g.edges)


def test_if_sources_are_conditions(separable_dir):
    for path in sorted((separable_dir / "protocols").iterdir()):
        g = parse(path.read_text())
        for src, _, lbl in g.edges:
            if lbl is IF:
                assert is_condition(g.phrase(src).text)
        assert validate_graph(g) == []


def test_deterministic_canonical_json(separable_dir):
    text = (separable_dir / "protocols" / "doc003.txt").read_text()
    assert dumps_graph(parse(text)) == dumps_graph(parse(text))
    g = parse(text)
    assert graph_from_json(graph_to_json(g)) == g


def test_canonical_json_shape():
    obj = graph_to_json(parse("1. a (lines 3-4)\n2. b"))
    assert obj == {"phrases": [{"id": "1", "text": "a", "lines": [3, 4]}, {"id": "2", "text": "b", "lines": []}],
                   "edges": [["1", "2", "next"]]}


def _graph(ids, edges):
    return ProtocolGraph([ProtocolPhrase(i, f"step {i}", frozenset({1})) for i in ids], edges)


def test_validate_clean_chain():
    assert validate_graph(_graph(["1", "2", "3"], [("1", "2", N), ("2", "3", N)])) == []


def test_validate_next_cycle():
    diags = validate_graph(_graph(["1", "2"], [("1", "2", N), ("2", "1", N)]))
    assert len(diags) == 1 and "cycle" in diags[0]


def test_validate_unanchored():
    diags = validate_graph(parse("1. anchored (line 3)\n2. floating"))
    assert len(diags) == 1 and diags[0].startswith("unanchored phrase")


def test_validate_dangling_and_self_loop():
    diags = validate_graph(_graph(["1"], [("1", "9", N), ("1", "1", IF)]))
    assert any("dangling" in d for d in diags)
    assert any("self-loop" in d for d in diags)


def test_relation_label_has_three_values():
    assert [lbl.value for lbl in RelationLabel.order()] == ["none", "next", "if"]
