"""Ontology construction: schema, instance population and OWL restrictions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple, Union

from .faers import CanonicalBatch
from .graph import (
    ADVERSE_EVENT,
    DRUG,
    EXPERIENCED,
    HAS_PATIENT,
    PATIENT,
    SAFETY_REPORT,
    TOOK,
    PropertyGraph,
    normalize_name,
)
from .rdf import IRI, OWL, RDF, RDFS, BNode, Literal, Namespace, RDFError, TripleGraph

DEFAULT_BASE_IRI = "http://example.org/graph-aid#"
DEFAULT_PREFIX = "aeo"

CLASSES = (SAFETY_REPORT, PATIENT, DRUG, ADVERSE_EVENT)

# object property -> (domain, range)
OBJECT_PROPERTIES = {
    "has_patient": (SAFETY_REPORT, PATIENT),
    "took": (PATIENT, DRUG),
    "has_reported": (PATIENT, ADVERSE_EVENT),
    "is_partOf_causing": (DRUG, ADVERSE_EVENT),
}
DATATYPE_PROPERTY = "has_activesubstance"

ALL_VALUES_FROM = "allValuesFrom"
SOME_VALUES_FROM = "someValuesFrom"
QUANTIFIERS = (ALL_VALUES_FROM, SOME_VALUES_FROM)

PAIRWISE = "pairwise"
NO_CAUSAL_LINKS = "none"


class OntologyError(RDFError):
    pass


class UndeclaredTermError(OntologyError):
    pass


class RestrictionSpec(NamedTuple):
    on_class: str
    property: str
    quantifier: str
    filler: str


DEFAULT_RESTRICTIONS = (
    RestrictionSpec(DRUG, "is_partOf_causing", ALL_VALUES_FROM, ADVERSE_EVENT),
    RestrictionSpec(PATIENT, "took", ALL_VALUES_FROM, DRUG),
    RestrictionSpec(PATIENT, "has_reported", ALL_VALUES_FROM, ADVERSE_EVENT),
    RestrictionSpec(SAFETY_REPORT, "has_patient", SOME_VALUES_FROM, PATIENT),
)


@dataclass(frozen=True)
class OntologyConfig:
    base_iri: str = DEFAULT_BASE_IRI
    emit_owl_class_typing: bool = True
    restrictions: tuple[RestrictionSpec, ...] = DEFAULT_RESTRICTIONS
    causal_link_policy: str = PAIRWISE
    prefix: str = DEFAULT_PREFIX

    def __post_init__(self):
        if not self.base_iri.endswith(("#", "/")):
            raise OntologyError(f"base IRI must end in '#' or '/': {self.base_iri!r}")
        IRI(self.base_iri)
        if self.causal_link_policy not in (PAIRWISE, NO_CAUSAL_LINKS):
            raise OntologyError(f"unknown causal link policy {self.causal_link_policy!r}")
        object.__setattr__(self, "restrictions", tuple(RestrictionSpec(*r) for r in self.restrictions))
        for r in self.restrictions:
            if r.quantifier not in QUANTIFIERS:
                raise OntologyError(f"unknown quantifier {r.quantifier!r}")

    @property
    def ns(self) -> Namespace:
        return Namespace(self.base_iri)


def parse_restrictions(text: str) -> tuple[RestrictionSpec, ...]:
    """``"Drug is_partOf_causing allValuesFrom AdverseEvent; ..."``; ``none`` clears all."""
    text = text.strip()
    if text.lower() in ("", "none"):
        return ()
    specs = []
    for chunk in text.split(";"):
        parts = chunk.split()
        if not parts:
            continue
        if len(parts) != 4:
            raise OntologyError(f"restriction needs 'Class property quantifier Filler', got {chunk.strip()!r}")
        specs.append(RestrictionSpec(*parts))
    return tuple(specs)


_UNRESERVED = frozenset("ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789_-")


def sanitize_identifier(identifier: str) -> str:
    """Percent-encode (UTF-8, uppercase hex) every character outside ``[A-Za-z0-9_-]``.

    ``%`` itself is encoded, which keeps the mapping injective.
    """
    return "".join(
        ch if ch in _UNRESERVED else "".join(f"%{b:02X}" for b in ch.encode("utf-8"))
        for ch in identifier
    )


def mint_instance_iri(config: OntologyConfig, kind: str, identifier: str) -> IRI:
    if not identifier:
        raise OntologyError(f"empty identifier for {kind}")
    return IRI(f"{config.base_iri}{kind}_{sanitize_identifier(identifier)}")


def declare_schema(config: OntologyConfig | None = None) -> TripleGraph:
    config = config or OntologyConfig()
    ns = config.ns
    g = TripleGraph({config.prefix: config.base_iri})
    for name in CLASSES:
        g.add(ns[name], RDF.type, RDFS.Class)
        if config.emit_owl_class_typing:
            g.add(ns[name], RDF.type, OWL.Class)
    for prop, (domain, range_) in OBJECT_PROPERTIES.items():
        g.add(ns[prop], RDF.type, OWL.ObjectProperty)
        g.add(ns[prop], RDFS.domain, ns[domain])
        g.add(ns[prop], RDFS.range, ns[range_])
    g.add(ns[DATATYPE_PROPERTY], RDF.type, OWL.DatatypeProperty)
    g.add(ns[DATATYPE_PROPERTY], RDFS.domain, ns[DRUG])
    g.add(ns[DATATYPE_PROPERTY], RDFS.term("range"), RDFS.Literal)
    return g


def _is_declared_property(g: TripleGraph, prop: IRI) -> bool:
    return any(
        (prop, RDF.type, kind) in g for kind in (OWL.ObjectProperty, OWL.DatatypeProperty)
    )


def _is_declared_class(g: TripleGraph, cls: IRI) -> bool:
    return (cls, RDF.type, RDFS.Class) in g or (cls, RDF.type, OWL.Class) in g


def add_class_restriction(graph: TripleGraph, on_class: IRI, prop: IRI, quantifier: str, filler: IRI) -> BNode:
    """Attach ``on_class rdfs:subClassOf [owl:onProperty prop; owl:<quantifier> filler]``.

    Every call allocates a fresh blank node; identical restrictions are not merged.
    """
    if quantifier not in QUANTIFIERS:
        raise OntologyError(f"unknown quantifier {quantifier!r}")
    if not _is_declared_property(graph, prop):
        raise UndeclaredTermError(f"property {prop} is not declared")
    if not _is_declared_class(graph, filler):
        raise UndeclaredTermError(f"filler class {filler} is not declared")
    if not _is_declared_class(graph, on_class):
        raise UndeclaredTermError(f"class {on_class} is not declared")
    node = graph.new_blank_node()
    graph.add(node, RDF.type, OWL.Restriction)
    graph.add(node, OWL.onProperty, prop)
    graph.add(node, OWL.term(quantifier), filler)
    graph.add(on_class, RDFS.subClassOf, node)
    return node


# -- population --------------------------------------------------------------

@dataclass
class _CaseView:
    report_id: str
    drugs: list[tuple[str, tuple[str, ...]]] = field(default_factory=list)
    events: list[str] = field(default_factory=list)


def _cases_from_batch(batch: CanonicalBatch) -> Iterator[_CaseView]:
    for report in batch.reports:
        view = _CaseView(report.report_id.strip())
        for drug in report.patient.drugs:
            view.drugs.append((
                normalize_name(drug.medicinal_product),
                tuple(s.strip() for s in drug.active_substances),
            ))
        view.events = [normalize_name(r.term) for r in report.patient.reactions]
        yield view


def _cases_from_graph(graph: PropertyGraph) -> Iterator[_CaseView]:
    patients: dict = {}
    for rel in graph.relationships(HAS_PATIENT):
        patients[rel.target] = _CaseView(rel.source.key_value)
    for rel in graph.relationships(TOOK):
        if rel.source in patients:
            subs = graph.node(rel.target).properties.get("activesubstances", ())
            patients[rel.source].drugs.append((rel.target.key_value, tuple(subs)))
    for rel in graph.relationships(EXPERIENCED):
        if rel.source in patients and rel.target.label == ADVERSE_EVENT:
            patients[rel.source].events.append(rel.target.key_value)
    yield from patients.values()


def populate_instances(
    schema_graph: TripleGraph,
    source: Union[CanonicalBatch, PropertyGraph],
    config: OntologyConfig | None = None,
) -> TripleGraph:
    """Return a copy of ``schema_graph`` with one individual per entity.

    ``source`` may be a filtered batch or a property graph built from one.
    """
    config = config or OntologyConfig()
    ns = config.ns
    cases: Iterable[_CaseView]
    if isinstance(source, PropertyGraph):
        cases = _cases_from_graph(source)
    else:
        cases = _cases_from_batch(source)

    g = schema_graph.copy()
    for case in cases:
        report = mint_instance_iri(config, SAFETY_REPORT, case.report_id)
        patient = mint_instance_iri(config, PATIENT, case.report_id)
        g.add(report, RDF.type, ns[SAFETY_REPORT])
        g.add(patient, RDF.type, ns[PATIENT])
        g.add(report, ns.has_patient, patient)
        drug_iris = []
        for name, substances in case.drugs:
            drug = mint_instance_iri(config, DRUG, name)
            drug_iris.append(drug)
            g.add(drug, RDF.type, ns[DRUG])
            g.add(patient, ns.took, drug)
            for substance in substances:
                g.add(drug, ns[DATATYPE_PROPERTY], Literal(substance))
        for term in case.events:
            event = mint_instance_iri(config, ADVERSE_EVENT, term)
            g.add(event, RDF.type, ns[ADVERSE_EVENT])
            g.add(patient, ns.has_reported, event)
            if config.causal_link_policy == PAIRWISE:
                for drug in drug_iris:
                    g.add(drug, ns.is_partOf_causing, event)
    return g


def ontology_iri(config: OntologyConfig) -> IRI:
    return IRI(config.base_iri.rstrip("#"))


def build_ontology(source: Union[CanonicalBatch, PropertyGraph], config: OntologyConfig | None = None) -> TripleGraph:
    """Schema, ontology header, default restrictions and instances in one graph."""
    config = config or OntologyConfig()
    ns = config.ns
    g = declare_schema(config)
    g.add(ontology_iri(config), RDF.type, OWL.Ontology)
    for spec in config.restrictions:
        add_class_restriction(g, ns[spec.on_class], ns[spec.property], spec.quantifier, ns[spec.filler])
    return populate_instances(g, source, config)


# -- audits ------------------------------------------------------------------

class Violation(NamedTuple):
    triple: tuple
    problem: str


def audit_domain_range(graph: TripleGraph) -> list[Violation]:
    """Check every property assertion against its declared domain and range.

    An object-property assertion passes when its subject is typed with the
    domain class and its object with the range class; a datatype-property
    assertion needs a typed subject and a literal object.
    """
    object_props = set(graph.subjects(RDF.type, OWL.ObjectProperty))
    data_props = set(graph.subjects(RDF.type, OWL.DatatypeProperty))
    domains = {p: set(graph.objects(p, RDFS.domain)) for p in object_props | data_props}
    ranges = {p: set(graph.objects(p, RDFS.term("range"))) for p in object_props}
    types: dict = {}
    for s, _, o in graph.triples(None, RDF.type):
        types.setdefault(s, set()).add(o)

    problems = []
    for t in graph:
        s, p, o = t
        if p in object_props:
            if not domains[p] <= types.get(s, set()):
                problems.append(Violation(t, "subject outside declared domain"))
            if isinstance(o, Literal) or not ranges[p] <= types.get(o, set()):
                problems.append(Violation(t, "object outside declared range"))
        elif p in data_props:
            if not domains[p] <= types.get(s, set()):
                problems.append(Violation(t, "subject outside declared domain"))
            if not isinstance(o, Literal):
                problems.append(Violation(t, "datatype property with non-literal value"))
    return problems


def untyped_instances(graph: TripleGraph, config: OntologyConfig | None = None) -> list[IRI]:
    """Minted individuals lacking an rdf:type to one of the four core classes."""
    config = config or OntologyConfig()
    classes = {config.ns[c] for c in CLASSES}
    prefixes = tuple(f"{config.base_iri}{c}_" for c in CLASSES)
    individuals = {
        x for t in graph for x in (t[0], t[2])
        if isinstance(x, IRI) and x.value.startswith(prefixes)
    }
    return sorted(
        (i for i in individuals if not set(graph.objects(i, RDF.type)) & classes),
        key=lambda i: i.value,
    )
