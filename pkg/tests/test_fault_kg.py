from __future__ import annotations

import pytest
import rdflib

from subclass_discovery.fault_kg import (
    IRI,
    RDF_TYPE,
    SFO,
    XSD,
    DiscoveryOutcome,
    Graph,
    Literal,
    QualityFlags,
    SensorFault,
    TurtleParseError,
    add_fault,
    all_fault_descriptions,
    from_turtle,
    query,
    to_turtle,
)

FAULT_CLASS = IRI(SFO + "SensorFault")


def _graph(n):
    g = Graph()
    for i in range(n):
        add_fault(g, SensorFault(str(i), f"class_{i}", f"desc {i}", severity=i))
    return g


def test_add_fault_writes_four_triples():
    g = add_fault(Graph(), SensorFault("a", "spike", "one-peak, rising-start", severity=0.5))
    assert len(g) == 4
    iri = IRI(SFO + "fault_a")
    assert (iri, IRI(RDF_TYPE), FAULT_CLASS) in g
    assert (iri, IRI(SFO + "name"), Literal("spike")) in g
    assert (iri, IRI(SFO + "severity"), Literal("0.5", XSD + "double")) in g


def test_duplicates_are_rejected():
    g = add_fault(Graph(), SensorFault("a", "spike", "x"))
    with pytest.raises(ValueError, match="already exists"):
        add_fault(g, SensorFault("b", "spike", "y"))
    with pytest.raises(ValueError, match="already exists"):
        add_fault(g, SensorFault("a", "drift", "y"))


def test_fault_validation():
    with pytest.raises(ValueError):
        SensorFault("a", "", "x")
    with pytest.raises(ValueError):
        SensorFault("a", "n", "")
    with pytest.raises(ValueError):
        SensorFault("a b", "n", "x")


def test_add_then_query_by_name_round_trips():
    g = add_fault(Graph(), SensorFault("7", "drift", "level-end", severity="high"))
    rows = query(g, ("?f", IRI(SFO + "name"), Literal("drift")),
                 ("?f", IRI(SFO + "fault_desc"), "?d"),
                 ("?f", IRI(SFO + "severity"), "?s"))
    assert len(rows) == 1
    assert rows[0]["d"] == Literal("level-end")
    assert rows[0]["s"].to_python() == "high"


def test_query_examples():
    g = _graph(5)
    assert len(query(g, ("?s", IRI(RDF_TYPE), FAULT_CLASS))) == 5
    ground = (IRI(SFO + "fault_2"), IRI(RDF_TYPE), FAULT_CLASS)
    assert query(g, ground) == [{}]
    assert query(g, ("?s", IRI(SFO + "name"), Literal("nope"))) == []


def test_query_order_is_deterministic():
    g = _graph(4)
    names = [b["n"].lexical for b in query(g, ("?s", IRI(SFO + "name"), "?n"))]
    assert names == sorted(names)


def test_query_joins_on_shared_variables():
    g = _graph(3)
    g.add((IRI(SFO + "fault_0"), IRI(SFO + "related"), IRI(SFO + "fault_1")))
    rows = query(g, ("?a", IRI(SFO + "related"), "?b"), ("?b", IRI(SFO + "name"), "?n"))
    assert rows == [{"a": IRI(SFO + "fault_0"), "b": IRI(SFO + "fault_1"),
                     "n": Literal("class_1")}]


def test_all_fault_descriptions():
    assert all_fault_descriptions(Graph()) == []
    g = _graph(8)
    rows = all_fault_descriptions(g)
    assert len(rows) == 8
    assert rows[3] == ("class_3", "desc 3", 3)
    g2 = add_fault(Graph(), SensorFault("x", "n", "d", severity="arbitrary value"))
    assert all_fault_descriptions(g2)[0][2] == "arbitrary value"


def test_graph_equality_ignores_insertion_order():
    triples = list(_graph(3))
    assert Graph(triples) == Graph(reversed(triples))
    assert Graph(triples) != Graph(triples[:-1])


def test_turtle_round_trip_with_escapes():
    g = Graph()
    add_fault(g, SensorFault("q", 'quote " and \\ backslash', "line\nbreak\ttab", severity=True))
    add_fault(g, SensorFault("u", "ünïcødé ✓", "emoji 🙂", severity=-3))
    add_fault(g, SensorFault("f", "float", "d", severity=1e-7))
    assert from_turtle(to_turtle(g)) == g


def test_turtle_is_readable_by_rdflib():
    g = _graph(3)
    text = to_turtle(g)
    other = rdflib.Graph().parse(data=text, format="turtle")
    assert len(other) == len(g)
    names = {str(o) for o in other.objects(None, rdflib.URIRef(SFO + "name"))}
    assert names == {"class_0", "class_1", "class_2"}


def test_turtle_reads_rdflib_output():
    text = rdflib.Graph().parse(data=to_turtle(_graph(2)), format="turtle").serialize(format="turtle")
    assert from_turtle(text) == _graph(2)


def test_serialization_is_sorted_and_stable():
    g = _graph(3)
    assert to_turtle(g) == to_turtle(Graph(reversed(list(g))))


def test_empty_graph_has_prefixes_only():
    text = to_turtle(Graph())
    lines = [line for line in text.splitlines() if line.strip()]
    assert lines and all(line.startswith("@prefix") for line in lines)
    assert len(from_turtle(text)) == 0


@pytest.mark.parametrize("text, line", [
    ('@prefix sfo: <http://x#> .\nsfo:a sfo:b "unterminated .\n', 2),
    ("@prefix sfo: <http://x#> .\n\nsfo:a sfo:b sfo:c\n", 4),  # end of input
    ("undeclared:a undeclared:b undeclared:c .\n", 1),
])
def test_parse_errors_report_location(text, line):
    with pytest.raises(TurtleParseError) as info:
        from_turtle(text)
    assert info.value.line == line
    assert info.value.column >= 1
    assert f"line {line}" in str(info.value)


def test_discovery_outcome_invariants():
    assert DiscoveryOutcome("knowledge", fault="class_1").fault == "class_1"
    assert DiscoveryOutcome("pattern", flags=QualityFlags(0.5, 0.3)).fault is None
    with pytest.raises(ValueError):
        DiscoveryOutcome("knowledge")
    with pytest.raises(ValueError):
        DiscoveryOutcome("none", fault="class_1")
    with pytest.raises(ValueError):
        DiscoveryOutcome("maybe")
