import pytest
from hypothesis import given, settings

from faers2owl.faers import CanonicalBatch, filter_reports
from faers2owl.graph import build_faers_graph
from faers2owl.model import DrugRecord, PatientRecord, ReactionRecord, SafetyReport
from faers2owl.ontology import (
    DEFAULT_BASE_IRI,
    NO_CAUSAL_LINKS,
    OntologyConfig,
    OntologyError,
    RestrictionSpec,
    UndeclaredTermError,
    add_class_restriction,
    audit_domain_range,
    build_ontology,
    declare_schema,
    mint_instance_iri,
    parse_restrictions,
    populate_instances,
    untyped_instances,
)
from faers2owl.rdf import IRI, OWL, RDF, RDFS, BNode, Literal, TripleGraph
from helpers import batches_st, expected_instance_triples, norm, random_batch

AEO = DEFAULT_BASE_IRI


def aeo(name):
    return IRI(AEO + name)


def fixture_batch() -> CanonicalBatch:
    """One report, two drugs with one substance each, one reaction."""
    patient = PatientRecord(
        drugs=(DrugRecord("Aspirin", None, ("ACETYLSALICYLIC ACID",)), DrugRecord("Warfarin", None, ("WARFARIN",))),
        reactions=(ReactionRecord("Gastrointestinal haemorrhage"),),
    )
    return filter_reports([SafetyReport("R1", patient=patient)], "fixture")


def without_blank_nodes(graph):
    return {t for t in graph if not any(isinstance(x, BNode) for x in t)}


def test_schema_count_default():
    # 4 classes x 2 typings + 4 object properties x 3 + datatype typing, domain and range
    assert len(declare_schema()) == 8 + 12 + 3 == 23


def test_schema_count_without_owl_typing():
    assert len(declare_schema(OntologyConfig(emit_owl_class_typing=False))) == 19


def test_schema_domains_and_ranges():
    g = declare_schema()
    assert (aeo("has_patient"), RDFS.domain, aeo("SafetyReport")) in g
    assert (aeo("has_patient"), RDFS.range, aeo("Patient")) in g
    assert (aeo("took"), RDFS.domain, aeo("Patient")) in g
    assert (aeo("took"), RDFS.range, aeo("Drug")) in g
    assert (aeo("has_reported"), RDFS.domain, aeo("Patient")) in g
    assert (aeo("has_reported"), RDFS.range, aeo("AdverseEvent")) in g
    assert (aeo("is_partOf_causing"), RDFS.domain, aeo("Drug")) in g
    assert (aeo("is_partOf_causing"), RDFS.range, aeo("AdverseEvent")) in g
    assert (aeo("has_activesubstance"), RDF.type, OWL.DatatypeProperty) in g
    assert (aeo("has_activesubstance"), RDFS.domain, aeo("Drug")) in g
    for cls in ("SafetyReport", "Patient", "Drug", "AdverseEvent"):
        assert (aeo(cls), RDF.type, RDFS.Class) in g
        assert (aeo(cls), RDF.type, OWL.Class) in g


def test_config_validation():
    with pytest.raises(OntologyError):
        OntologyConfig(base_iri="http://example.org/no-terminator")
    with pytest.raises(OntologyError):
        OntologyConfig(causal_link_policy="sometimes")
    with pytest.raises(OntologyError):
        OntologyConfig(restrictions=(("Drug", "took", "exactly", "Drug"),))


def test_mint_iri_examples():
    cfg = OntologyConfig()
    assert mint_instance_iri(cfg, "Drug", "ASPIRIN") == aeo("Drug_ASPIRIN")
    assert mint_instance_iri(cfg, "AdverseEvent", "HEART ATTACK") == aeo("AdverseEvent_HEART%20ATTACK")
    assert mint_instance_iri(cfg, "Drug", "A/B") == aeo("Drug_A%2FB")
    assert mint_instance_iri(cfg, "Drug", "A/B") != mint_instance_iri(cfg, "Drug", "A_B")
    assert mint_instance_iri(cfg, "Drug", "É%") == aeo("Drug_%C3%89%25")
    with pytest.raises(OntologyError):
        mint_instance_iri(cfg, "Drug", "")


def test_mint_iri_is_injective():
    names = ["A B", "A%20B", "A_B", "A/B", "a b", "é", "%C3%A9", "x-y", "x.y"]
    iris = {mint_instance_iri(OntologyConfig(), "Drug", n) for n in names}
    assert len(iris) == len(names)


def test_instance_count_fixture():
    schema = declare_schema()
    g = populate_instances(schema, fixture_batch())
    assert len(g) - len(schema) == 13
    g = populate_instances(schema, fixture_batch(), OntologyConfig(causal_link_policy=NO_CAUSAL_LINKS))
    assert len(g) - len(schema) == 11


def test_populate_empty_batch_is_identity():
    schema = declare_schema()
    g = populate_instances(schema, CanonicalBatch("empty"))
    assert set(g) == set(schema)
    assert len(schema) == 23


def test_populate_does_not_mutate_schema():
    schema = declare_schema()
    populate_instances(schema, fixture_batch())
    assert len(schema) == 23


def test_build_ontology_counts():
    assert len(build_ontology(CanonicalBatch("empty"))) == 40
    assert len(build_ontology(fixture_batch())) == 53


def test_build_ontology_header_and_restrictions():
    g = build_ontology(CanonicalBatch("empty"))
    assert (IRI("http://example.org/graph-aid"), RDF.type, OWL.Ontology) in g
    found = set()
    for cls, _, node in g.triples(None, RDFS.subClassOf):
        (prop,) = g.objects(node, OWL.onProperty)
        quantified = [(q, f) for _, q, f in g.triples(node) if q in (OWL.allValuesFrom, OWL.someValuesFrom)]
        assert (node, RDF.type, OWL.Restriction) in g
        ((q, filler),) = quantified
        found.add((cls, prop, q, filler))
    assert found == {
        (aeo("Drug"), aeo("is_partOf_causing"), OWL.allValuesFrom, aeo("AdverseEvent")),
        (aeo("Patient"), aeo("took"), OWL.allValuesFrom, aeo("Drug")),
        (aeo("Patient"), aeo("has_reported"), OWL.allValuesFrom, aeo("AdverseEvent")),
        (aeo("SafetyReport"), aeo("has_patient"), OWL.someValuesFrom, aeo("Patient")),
    }


def test_restriction_is_four_triples_and_never_merged():
    g = declare_schema()
    before = len(g)
    b1 = add_class_restriction(g, aeo("Drug"), aeo("is_partOf_causing"), "allValuesFrom", aeo("AdverseEvent"))
    assert len(g) - before == 4
    b2 = add_class_restriction(g, aeo("Drug"), aeo("is_partOf_causing"), "allValuesFrom", aeo("AdverseEvent"))
    assert b1 != b2
    assert len(g) - before == 8


def test_restriction_requires_declared_terms():
    g = declare_schema()
    with pytest.raises(UndeclaredTermError):
        add_class_restriction(g, aeo("Drug"), aeo("causes"), "allValuesFrom", aeo("AdverseEvent"))
    with pytest.raises(UndeclaredTermError):
        add_class_restriction(g, aeo("Drug"), aeo("took"), "allValuesFrom", aeo("Vaccine"))
    with pytest.raises(OntologyError):
        add_class_restriction(g, aeo("Drug"), aeo("took"), "exactly", aeo("Drug"))


def test_parse_restrictions():
    assert parse_restrictions("none") == ()
    specs = parse_restrictions("Drug took someValuesFrom Drug; Patient took allValuesFrom Drug")
    assert specs == (
        RestrictionSpec("Drug", "took", "someValuesFrom", "Drug"),
        RestrictionSpec("Patient", "took", "allValuesFrom", "Drug"),
    )
    with pytest.raises(OntologyError):
        parse_restrictions("Drug took")
    g = build_ontology(CanonicalBatch("x"), OntologyConfig(restrictions=()))
    assert len(g) == 24


def test_audits_pass_on_built_ontology():
    g = build_ontology(random_batch(200, seed=21))
    assert audit_domain_range(g) == []
    assert untyped_instances(g) == []


def test_audit_flags_bad_assertions():
    g = build_ontology(fixture_batch())
    drug = aeo("Drug_ASPIRIN")
    g.add(drug, aeo("has_patient"), aeo("Patient_R1"))
    g.add(aeo("Patient_R1"), aeo("has_activesubstance"), aeo("Drug_ASPIRIN"))
    g.add(aeo("Patient_R1"), aeo("took"), aeo("Drug_GHOST"))
    problems = {(v.triple, v.problem) for v in audit_domain_range(g)}
    assert ((drug, aeo("has_patient"), aeo("Patient_R1")), "subject outside declared domain") in problems
    assert any(p == "datatype property with non-literal value" for _, p in problems)
    assert any(t[2] == aeo("Drug_GHOST") and p == "object outside declared range" for t, p in problems)
    assert untyped_instances(g) == [aeo("Drug_GHOST")]


def test_population_from_property_graph_matches_batch():
    batch = random_batch(150, seed=8)
    schema = declare_schema()
    from_batch = populate_instances(schema, batch)
    from_graph = populate_instances(schema, build_faers_graph(batch))
    assert set(from_batch) == set(from_graph)


def test_substance_literals_deduplicated_per_drug():
    reports = [
        SafetyReport(str(i), patient=PatientRecord(
            drugs=(DrugRecord("Aspirin", None, ("ASA", "ASA")),), reactions=(ReactionRecord("Rash"),)))
        for i in range(3)
    ]
    g = build_ontology(filter_reports(reports))
    assert list(g.objects(aeo("Drug_ASPIRIN"), aeo("has_activesubstance"))) == [Literal("ASA")]


def test_disjoint_batches_union():
    a, b = random_batch(60, seed=31), random_batch(60, seed=32)
    union = TripleGraph()
    union.update(build_ontology(a))
    union.update(build_ontology(b))
    whole = build_ontology(CanonicalBatch("ab", a.reports + b.reports))
    assert without_blank_nodes(union) == without_blank_nodes(whole)


@pytest.mark.filterwarnings("ignore::faers2owl.graph.DuplicateReportWarning")
@settings(max_examples=100, deadline=None)
@given(batches_st)
def test_instance_counts_match_closed_form(batch):
    schema = declare_schema()
    g = populate_instances(schema, batch)
    assert len(g) - len(schema) == expected_instance_triples(batch)
    none = populate_instances(schema, batch, OntologyConfig(causal_link_policy=NO_CAUSAL_LINKS))
    assert len(none) - len(schema) == expected_instance_triples(batch, pairwise=False)
    drugs = {norm(d.medicinal_product) for r in batch.reports for d in r.patient.drugs}
    assert len(list(g.subjects(RDF.type, aeo("Drug")))) == len(drugs)
    assert audit_domain_range(g) == []
    assert untyped_instances(g) == []
