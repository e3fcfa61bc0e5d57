import io
import xml.etree.ElementTree as ET

import pytest
import rdflib
from hypothesis import given, settings
from hypothesis import strategies as st
from rdflib.compare import isomorphic as rdflib_isomorphic

from faers2owl.rdf import (
    IRI,
    OWL,
    RDF,
    RDFS,
    XSD,
    BNode,
    Literal,
    RDFError,
    TermError,
    TripleGraph,
    TurtleSyntaxError,
    UnsplittableIRIError,
    isomorphic,
    parse_turtle,
    rdfxml_bytes,
    serialize,
    split_iri,
    turtle_bytes,
)

EX = "http://example.org/x#"


def ex(name):
    return IRI(EX + name)


def to_rdflib(graph: TripleGraph) -> rdflib.Graph:
    out = rdflib.Graph()

    def conv(t):
        if isinstance(t, IRI):
            return rdflib.URIRef(t.value)
        if isinstance(t, BNode):
            return rdflib.BNode(t.label)
        dt = rdflib.URIRef(t.datatype.value) if t.datatype else None
        return rdflib.Literal(t.lexical, datatype=dt)

    for s, p, o in graph:
        out.add((conv(s), conv(p), conv(o)))
    return out


def test_add_returns_true_then_false():
    g = TripleGraph()
    assert g.add(ex("Drug"), RDF.type, OWL.Class)
    assert not g.add(ex("Drug"), RDF.type, OWL.Class)
    assert len(g) == 1


def test_literal_subject_rejected():
    with pytest.raises(TermError):
        TripleGraph().add(Literal("x"), RDF.type, OWL.Class)


def test_predicate_must_be_iri():
    with pytest.raises(TermError):
        TripleGraph().add(ex("a"), BNode("b0"), ex("c"))


def test_bad_iri_rejected():
    with pytest.raises(TermError):
        IRI("not an iri")


def test_blank_nodes_are_fresh():
    g = TripleGraph()
    a, b = g.new_blank_node(), g.new_blank_node()
    assert a != b and (a.label, b.label) == ("b0", "b1")
    g.add(BNode("b7"), RDF.type, OWL.Restriction)
    assert g.new_blank_node().label == "b8"


def test_empty_graph_turtle_is_prefixes_only():
    text = turtle_bytes(TripleGraph()).decode()
    lines = text.splitlines()
    assert lines and all(line.startswith("@prefix ") for line in lines)
    assert len(parse_turtle(text)) == 0


def test_single_class_declaration():
    g = TripleGraph({"ex": EX})
    g.add(ex("Drug"), RDF.type, OWL.Class)
    lines = [line for line in turtle_bytes(g).decode().splitlines() if line and not line.startswith("@prefix")]
    assert lines == ["ex:Drug a owl:Class ."]


def test_turtle_round_trip_with_escapes_and_datatypes():
    g = TripleGraph({"ex": EX})
    r = g.new_blank_node()
    g.add(ex("Drug"), RDFS.label, Literal('O\'Brien "5"\n\\ \t中 \x01'))
    g.add(ex("Drug"), RDFS.subClassOf, r)
    g.add(r, OWL.onProperty, ex("took"))
    g.add(ex("a"), ex("age"), Literal("45.5", XSD.decimal))
    g.add(IRI("urn:other:thing"), ex("p"), Literal(""))
    back = parse_turtle(turtle_bytes(g))
    assert isomorphic(g, back)
    assert rdflib_isomorphic(to_rdflib(g), rdflib.Graph().parse(data=turtle_bytes(g), format="turtle"))


def test_parse_turtle_syntax_features():
    text = """
    # leading comment
    PREFIX ex: <http://example.org/x#>
    @prefix : <http://example.org/d#> .
    ex:a a ex:C ; ex:p ex:b , ex:c ;
        ex:q "x\\u00e9"^^<http://www.w3.org/2001/XMLSchema#string> .
    :d ex:r _:n1 .
    _:n1 ex:s 'single' .
    """
    g = parse_turtle(text)
    assert len(g) == 6
    assert (ex("a"), RDF.type, ex("C")) in g
    assert (ex("a"), ex("q"), Literal("xé", XSD.string)) in g
    assert list(g.objects(BNode("n1"), ex("s"))) == [Literal("single")]


def test_parse_comments_only():
    assert len(parse_turtle("# nothing here\n\n# at all\n")) == 0


@pytest.mark.parametrize(
    "text,line,column",
    [
        ("@prefix ex: <http://e/#> .\nex:a ex:b ex:c", 2, 15),
        ("@prefix ex: <http://e/#> .\nex:a ex:b\n  nope:c .", 3, 3),
        ('<http://e/a> <http://e/b> "open\n', 1, 27),
    ],
)
def test_parse_errors_carry_position(text, line, column):
    with pytest.raises(TurtleSyntaxError) as info:
        parse_turtle(text)
    assert (info.value.line, info.value.column) == (line, column)


def test_parse_rejects_long_strings_and_language_tags():
    with pytest.raises(TurtleSyntaxError):
        parse_turtle('<http://e/a> <http://e/b> """x""" .')
    with pytest.raises(TurtleSyntaxError):
        parse_turtle('<http://e/a> <http://e/b> "x"@en .')


def test_standard_prefix_is_protected():
    with pytest.raises(RDFError):
        TripleGraph().bind("owl", "http://example.org/not-owl#")


def test_split_iri():
    assert split_iri(ex("has_patient")) == (EX, "has_patient")
    assert split_iri(IRI("http://e/path/9abc")) == ("http://e/path/9", "abc")
    with pytest.raises(UnsplittableIRIError):
        split_iri(IRI("http://e/123"))


def test_rdfxml_blank_nodes_use_node_id():
    g = TripleGraph({"ex": EX})
    r = g.new_blank_node()
    g.add(ex("Drug"), RDFS.subClassOf, r)
    g.add(r, RDF.type, OWL.Restriction)
    data = rdfxml_bytes(g)
    root = ET.fromstring(data)
    rdf_ns = "{" + str(RDF) + "}"
    descs = root.findall(rdf_ns + "Description")
    assert {d.get(rdf_ns + "nodeID") for d in descs} == {None, "b0"}
    assert rdflib_isomorphic(to_rdflib(g), rdflib.Graph().parse(data=data, format="xml"))


@pytest.mark.parametrize("predicate", ["http://e/123", "http://e/ns/"])
def test_rdfxml_unsplittable_predicate(predicate):
    g = TripleGraph()
    g.add(ex("a"), IRI(predicate), ex("b"))
    with pytest.raises(UnsplittableIRIError):
        rdfxml_bytes(g)


def test_rdfxml_empty_graph_is_bare_root():
    root = ET.fromstring(rdfxml_bytes(TripleGraph()))
    assert root.tag == "{" + str(RDF) + "}RDF"
    assert len(root) == 0


def test_rdfxml_invents_prefixes_for_unknown_namespaces():
    g = TripleGraph()
    g.add(ex("a"), IRI("http://one.example/p"), Literal("1 < 2 & \"q\""))
    g.add(ex("a"), IRI("http://two.example/q"), Literal("x", XSD.integer))
    data = rdfxml_bytes(g).decode()
    assert 'xmlns:ns1="http://one.example/"' in data
    assert 'xmlns:ns2="http://two.example/"' in data
    assert rdflib_isomorphic(to_rdflib(g), rdflib.Graph().parse(data=data, format="xml"))


def test_serialize_dispatch():
    g = TripleGraph()
    assert serialize(g, "ttl") == turtle_bytes(g)
    assert serialize(g, "owl") == rdfxml_bytes(g)
    with pytest.raises(ValueError):
        serialize(g, "n3")


def test_serialization_is_deterministic():
    g1, g2 = TripleGraph({"ex": EX}), TripleGraph({"ex": EX})
    triples = [(ex(f"s{i}"), ex("p"), Literal(str(i % 3))) for i in range(20)]
    g1.update(triples)
    g2.update(reversed(triples))
    assert turtle_bytes(g1) == turtle_bytes(g2)
    assert rdfxml_bytes(g1) == rdfxml_bytes(g2)


def test_isomorphic_up_to_blank_node_renaming():
    a, b = TripleGraph(), TripleGraph()
    a.add(ex("x"), ex("p"), BNode("b0"))
    a.add(BNode("b0"), ex("q"), BNode("b1"))
    b.add(ex("x"), ex("p"), BNode("z9"))
    b.add(BNode("z9"), ex("q"), BNode("y1"))
    assert isomorphic(a, b)
    b2 = TripleGraph()
    b2.add(ex("x"), ex("p"), BNode("z9"))
    b2.add(BNode("y1"), ex("q"), BNode("z9"))
    assert not isomorphic(a, b2)


# -- property: serialize then parse yields an isomorphic graph ----------------

_names = st.sampled_from(["a", "b", "c", "Drug_X", "x%20y", "n-1"])
_iris = _names.map(ex) | st.sampled_from([IRI("urn:x:y"), IRI("http://other.example/z/1")])
_literals = st.builds(
    Literal,
    st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=8),
    st.none() | st.sampled_from([XSD.string, XSD.integer]),
)
_bnodes = st.sampled_from([BNode("b0"), BNode("b1"), BNode("b2")])
_triples = st.tuples(_iris | _bnodes, _names.map(ex), _iris | _bnodes | _literals)


@settings(max_examples=150, deadline=None)
@given(st.lists(_triples, max_size=12))
def test_turtle_round_trip_property(triples):
    g = TripleGraph({"ex": EX})
    g.update(triples)
    data = turtle_bytes(g)
    assert isomorphic(parse_turtle(io.BytesIO(data)), g)


@settings(max_examples=80, deadline=None)
@given(st.lists(_triples, max_size=10))
def test_rdfxml_agrees_with_rdflib(triples):
    g = TripleGraph({"ex": EX})
    g.update(triples)
    try:
        data = rdfxml_bytes(g)
    except RDFError:
        # some literals hold characters XML 1.0 cannot carry
        return
    parsed = rdflib.Graph().parse(data=data, format="xml")
    assert rdflib_isomorphic(to_rdflib(g), parsed)


@settings(max_examples=100, deadline=None)
@given(st.lists(_triples, max_size=10), st.permutations(["q0", "q1", "q2"]))
def test_isomorphic_under_relabeling(triples, labels):
    g = TripleGraph()
    g.update(triples)
    rename = {BNode(f"b{i}"): BNode(label) for i, label in enumerate(labels)}
    h = TripleGraph()
    h.update(tuple(rename.get(x, x) for x in t) for t in triples)
    assert isomorphic(g, h)
    assert rdflib_isomorphic(to_rdflib(g), to_rdflib(h))
