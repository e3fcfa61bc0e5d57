"""In-memory property graph with MERGE semantics, plus Cypher script emission."""
from __future__ import annotations

import re
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Iterator, Mapping, NamedTuple, Sequence, Union

from . import __version__
from .faers import CanonicalBatch
from .model import VocabularySet
from .vaers import VaersCase

Scalar = Union[str, int, bool]
PropertyValue = Union[Scalar, tuple]

SAFETY_REPORT, PATIENT, DRUG, ADVERSE_EVENT = "SafetyReport", "Patient", "Drug", "AdverseEvent"
SYMPTOM, VACCINE = "Symptom", "Vaccine"
HAS_PATIENT, TOOK, EXPERIENCED, RECEIVED = "HAS_PATIENT", "TOOK", "EXPERIENCED", "RECEIVED"

# property holding the merge key, per label
FAERS_KEYS = {
    SAFETY_REPORT: "safetyreportid",
    PATIENT: "patientid",
    DRUG: "medicinalproduct",
    ADVERSE_EVENT: "reactionmeddrapt",
}
VAERS_KEYS = {PATIENT: "vaers_id", SYMPTOM: "name", VACCINE: "vax_type"}

DEFAULT_STATEMENT_SIZE = 500


class GraphError(ValueError):
    pass


class EmptyKeyError(GraphError):
    pass


class DanglingEndpointError(GraphError):
    pass


class DuplicateReportWarning(UserWarning):
    pass


@dataclass(frozen=True, order=True)
class NodeKey:
    label: str
    key_value: str


@dataclass(frozen=True)
class Node:
    key: NodeKey
    properties: Mapping[str, PropertyValue]


@dataclass(frozen=True, order=True)
class Relationship:
    type: str
    source: NodeKey
    target: NodeKey


class Merged(NamedTuple):
    key: NodeKey
    created: bool


def normalize_name(text: str) -> str:
    """Uppercase, trim and collapse internal whitespace."""
    return " ".join(text.split()).upper()


def _check_value(name: str, value: Any) -> PropertyValue:
    if isinstance(value, (str, int, bool)):
        return value
    if isinstance(value, (list, tuple)) and all(isinstance(v, str) for v in value):
        return tuple(value)
    raise GraphError(f"property {name!r}: unsupported value {value!r}")


class PropertyGraph:
    """Labeled nodes keyed on ``(label, key_value)`` and typed relationships.

    Both merge operations are idempotent, so replaying the same inputs leaves
    the graph unchanged.
    """

    def __init__(self):
        self._nodes: dict[NodeKey, dict[str, PropertyValue]] = {}
        self._rels: dict[Relationship, None] = {}

    def merge_node(self, label: str, key_value: str, properties: Mapping[str, Any] | None = None) -> Merged:
        if not label or not key_value:
            raise EmptyKeyError(f"empty node key ({label!r}, {key_value!r})")
        key = NodeKey(label, key_value)
        props = {k: _check_value(k, v) for k, v in (properties or {}).items()}
        existing = self._nodes.get(key)
        if existing is None:
            self._nodes[key] = props
            return Merged(key, True)
        existing.update(props)
        return Merged(key, False)

    def merge_relationship(self, rel_type: str, source: NodeKey, target: NodeKey) -> bool:
        for end in (source, target):
            if end not in self._nodes:
                raise DanglingEndpointError(f"{rel_type}: no node {end.label}({end.key_value!r})")
        rel = Relationship(rel_type, source, target)
        if rel in self._rels:
            return False
        self._rels[rel] = None
        return True

    def node(self, key: NodeKey) -> Node:
        return Node(key, dict(self._nodes[key]))

    def nodes(self, label: str | None = None) -> Iterator[Node]:
        for key, props in self._nodes.items():
            if label is None or key.label == label:
                yield Node(key, dict(props))

    def relationships(self, rel_type: str | None = None) -> Iterator[Relationship]:
        for rel in self._rels:
            if rel_type is None or rel.type == rel_type:
                yield rel

    def __contains__(self, key: object) -> bool:
        return key in self._nodes

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def relationship_count(self) -> int:
        return len(self._rels)

    def update(self, other: "PropertyGraph") -> None:
        """Replay another graph's merges into this one."""
        for key, props in other._nodes.items():
            self.merge_node(key.label, key.key_value, props)
        for rel in other._rels:
            self.merge_relationship(rel.type, rel.source, rel.target)

    def audit(self) -> list[Relationship]:
        """Relationships whose endpoints are missing; empty for a sound graph."""
        return [r for r in self._rels if r.source not in self._nodes or r.target not in self._nodes]

    def snapshot(self) -> tuple[dict, frozenset]:
        return ({k: dict(v) for k, v in self._nodes.items()}, frozenset(self._rels))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PropertyGraph):
            return NotImplemented
        return self.snapshot() == other.snapshot()

    def __repr__(self) -> str:
        return f"<PropertyGraph nodes={self.node_count} relationships={self.relationship_count}>"


# -- FAERS -------------------------------------------------------------------

@dataclass
class _ReportRow:
    report_id: str
    report_props: dict[str, str]
    patient_props: dict[str, str]
    drugs: list[tuple[str, dict[str, Any]]] = field(default_factory=list)
    reactions: list[str] = field(default_factory=list)


def _substance_union(batch: CanonicalBatch) -> dict[str, tuple[str, ...]]:
    # A drug's substances are unioned over the whole batch so the stored
    # property does not depend on report order.
    union: dict[str, set[str]] = {}
    for report in batch.reports:
        for drug in report.patient.drugs:
            union.setdefault(normalize_name(drug.medicinal_product), set()).update(
                s.strip() for s in drug.active_substances
            )
    return {name: tuple(sorted(subs)) for name, subs in union.items()}


def _faers_rows(batch: CanonicalBatch, vocab: VocabularySet | None) -> Iterator[_ReportRow]:
    vocab = vocab if vocab is not None else VocabularySet()
    substances = _substance_union(batch)
    for report in batch.reports:
        rid = report.report_id.strip()
        props = {"safetyreportid": rid}
        if report.receive_date is not None:
            props["receivedate"] = report.receive_date
        if report.serious is not None:
            props["serious"] = vocab.decode("serious", report.serious)
        p = report.patient
        patient = {"patientid": rid}
        for name, value in (
            ("patientonsetage", p.onset_age),
            ("patientonsetageunit", p.onset_age_unit),
            ("patientagegroup", p.age_group),
            ("patientsex", p.sex),
        ):
            if value is not None:
                patient[name] = vocab.decode(name, value)
        row = _ReportRow(rid, props, patient)
        seen_drugs: set[str] = set()
        for drug in p.drugs:
            name = normalize_name(drug.medicinal_product)
            if name in seen_drugs:
                continue
            seen_drugs.add(name)
            drug_props = {"activesubstances": substances[name]} if substances[name] else {}
            row.drugs.append((name, drug_props))
        seen_terms: set[str] = set()
        for reaction in p.reactions:
            term = normalize_name(reaction.term)
            if term not in seen_terms:
                seen_terms.add(term)
                row.reactions.append(term)
        yield row


def build_faers_graph(batch: CanonicalBatch, vocab: VocabularySet | None = None) -> PropertyGraph:
    """SafetyReport-HAS_PATIENT->Patient, Patient-TOOK->Drug, Patient-EXPERIENCED->AdverseEvent."""
    graph = PropertyGraph()
    seen: set[str] = set()
    for row in _faers_rows(batch, vocab):
        if row.report_id in seen:
            warnings.warn(
                f"duplicate safety report id {row.report_id!r}; later properties win",
                DuplicateReportWarning,
                stacklevel=2,
            )
        seen.add(row.report_id)
        report = graph.merge_node(SAFETY_REPORT, row.report_id, row.report_props).key
        patient = graph.merge_node(PATIENT, row.report_id, row.patient_props).key
        graph.merge_relationship(HAS_PATIENT, report, patient)
        for name, props in row.drugs:
            drug = graph.merge_node(DRUG, name, {"medicinalproduct": name, **props}).key
            graph.merge_relationship(TOOK, patient, drug)
        for term in row.reactions:
            event = graph.merge_node(ADVERSE_EVENT, term, {"reactionmeddrapt": term}).key
            graph.merge_relationship(EXPERIENCED, patient, event)
    return graph


def build_vaers_graph(cases: Iterable[VaersCase]) -> PropertyGraph:
    graph = PropertyGraph()
    for case in cases:
        patient = graph.merge_node(PATIENT, case.vaers_id, {"vaers_id": case.vaers_id}).key
        for symptom in sorted({normalize_name(s) for s in case.symptoms}):
            node = graph.merge_node(SYMPTOM, symptom, {"name": symptom}).key
            graph.merge_relationship(EXPERIENCED, patient, node)
        for vaccine in sorted({normalize_name(v) for v in case.vaccines}):
            node = graph.merge_node(VACCINE, vaccine, {"vax_type": vaccine}).key
            graph.merge_relationship(RECEIVED, patient, node)
    return graph


# -- statistics --------------------------------------------------------------

@dataclass(frozen=True)
class DegreeEntry:
    label: str
    key_value: str
    degree: int


@dataclass(frozen=True)
class GraphStats:
    nodes: Mapping[str, int]
    relationships: Mapping[str, int]
    top_degree: tuple[DegreeEntry, ...]

    def to_dict(self) -> dict[str, Any]:
        return {
            "nodes": dict(sorted(self.nodes.items())),
            "relationships": dict(sorted(self.relationships.items())),
            "top_degree": [
                {"label": e.label, "key": e.key_value, "degree": e.degree} for e in self.top_degree
            ],
        }


def graph_stats(graph: PropertyGraph, top: int = 10) -> GraphStats:
    """Exact per-label and per-type counts plus the ``top`` highest-degree nodes.

    Ties in degree are broken by key value, then label.
    """
    nodes = Counter(n.key.label for n in graph.nodes())
    rels = Counter(r.type for r in graph.relationships())
    degree: Counter = Counter()
    for rel in graph.relationships():
        degree[rel.source] += 1
        degree[rel.target] += 1
    ranked = sorted(
        (n.key for n in graph.nodes()),
        key=lambda k: (-degree[k], k.key_value, k.label),
    )
    entries = tuple(DegreeEntry(k.label, k.key_value, degree[k]) for k in ranked[:top])
    return GraphStats(nodes, rels, entries)


# -- Cypher ------------------------------------------------------------------

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_ESCAPES = {"\\": "\\\\", "'": "\\'", "\n": "\\n", "\r": "\\r", "\t": "\\t", "\b": "\\b", "\f": "\\f"}


def cypher_string(text: str) -> str:
    """Single-quoted Cypher string literal with backslash escapes."""
    out = []
    for ch in text:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20 or ch in "\u2028\u2029\x7f":
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "'" + "".join(out) + "'"


def cypher_literal(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, str):
        return cypher_string(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(cypher_literal(v) for v in value) + "]"
    if isinstance(value, Mapping):
        parts = []
        for k, v in value.items():
            name = k if _IDENT.match(k) else "`" + k.replace("`", "``") + "`"
            parts.append(f"{name}: {cypher_literal(v)}")
        return "{" + ", ".join(parts) + "}"
    raise TypeError(f"cannot render {value!r} as a Cypher literal")


_FAERS_STATEMENT = """\
UNWIND [
{rows}
] AS report
MERGE (sr:SafetyReport {{safetyreportid: report.safetyreportid}})
SET sr += report.properties
MERGE (p:Patient {{patientid: report.safetyreportid}})
SET p += report.patient
MERGE (sr)-[:HAS_PATIENT]->(p)
FOREACH (drug IN report.drugs |
  MERGE (d:Drug {{medicinalproduct: drug.medicinalproduct}})
  SET d += drug.properties
  MERGE (p)-[:TOOK]->(d)
)
FOREACH (reaction IN report.reactions |
  MERGE (ae:AdverseEvent {{reactionmeddrapt: reaction}})
  MERGE (p)-[:EXPERIENCED]->(ae)
);
"""

_VAERS_STATEMENT = """\
UNWIND [
{rows}
] AS row
MERGE (p:Patient {{vaers_id: row.vaers_id}})
FOREACH (symptom IN row.symptoms |
  MERGE (s:Symptom {{name: symptom}})
  MERGE (p)-[:EXPERIENCED]->(s)
)
FOREACH (vaccine IN row.vaccines |
  MERGE (v:Vaccine {{vax_type: vaccine}})
  MERGE (p)-[:RECEIVED]->(v)
);
"""


def _header(title: str, source_label: str, records: int) -> str:
    label = " ".join(source_label.split())
    return (
        f"// {title}\n"
        f"// source: {label}\n"
        f"// generator: faers2owl {__version__}\n"
        f"// records: {records}\n"
    )


def _chunks(items: Sequence, size: int) -> Iterator[Sequence]:
    for start in range(0, len(items), size):
        yield items[start:start + size]


def _write_statements(sink: IO[bytes], header: str, template: str, maps: Sequence[dict], size: int) -> int:
    if size < 1:
        raise ValueError("statement size must be positive")
    sink.write(header.encode("utf-8"))
    count = 0
    for chunk in _chunks(maps, size):
        rows = ",\n".join("  " + cypher_literal(m) for m in chunk)
        sink.write(("\n" + template.format(rows=rows)).encode("utf-8"))
        count += 1
    return count


def emit_cypher_script(
    batch: CanonicalBatch,
    sink: IO[bytes],
    vocab: VocabularySet | None = None,
    statement_size: int = DEFAULT_STATEMENT_SIZE,
) -> int:
    """Write a self-contained Cypher import script; returns the statement count.

    Each statement UNWINDs up to ``statement_size`` report maps and MERGEs the
    same nodes and relationships that :func:`build_faers_graph` creates.
    """
    maps = []
    for row in _faers_rows(batch, vocab):
        maps.append({
            "safetyreportid": row.report_id,
            "properties": row.report_props,
            "patient": row.patient_props,
            "drugs": [{"medicinalproduct": name, "properties": props} for name, props in row.drugs],
            "reactions": row.reactions,
        })
    header = _header("FAERS property-graph import", batch.source_label, len(maps))
    return _write_statements(sink, header, _FAERS_STATEMENT, maps, statement_size)


def emit_vaers_cypher(
    cases: Sequence[VaersCase],
    sink: IO[bytes],
    source_label: str = "vaers",
    statement_size: int = DEFAULT_STATEMENT_SIZE,
) -> int:
    maps = [
        {
            "vaers_id": c.vaers_id,
            "symptoms": sorted({normalize_name(s) for s in c.symptoms}),
            "vaccines": sorted({normalize_name(v) for v in c.vaccines}),
        }
        for c in cases
    ]
    header = _header("VAERS property-graph import", source_label, len(maps))
    return _write_statements(sink, header, _VAERS_STATEMENT, maps, statement_size)
