"""FAERS XML parsing, completeness filtering and the canonical JSON form."""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Any, Iterable, Iterator
from xml.parsers import expat

from .model import (
    DrugRecord,
    PatientRecord,
    ReactionRecord,
    SafetyReport,
    validate_report,
)

REPORT_TAG = "safetyreport"
CHUNK_SIZE = 1 << 16

# Recognized element paths relative to <safetyreport>. Containers open a new
# record; leaves carry text. Anything else is skipped and tallied.
_CONTAINERS = {
    ("patient",),
    ("patient", "drug"),
    ("patient", "drug", "activesubstance"),
    ("patient", "reaction"),
}
_LEAVES = {
    ("safetyreportid",): "safetyreportid",
    ("receivedate",): "receivedate",
    ("serious",): "serious",
    ("patient", "patientonsetage"): "patientonsetage",
    ("patient", "patientonsetageunit"): "patientonsetageunit",
    ("patient", "patientagegroup"): "patientagegroup",
    ("patient", "patientsex"): "patientsex",
    ("patient", "drug", "medicinalproduct"): "medicinalproduct",
    ("patient", "drug", "drugcharacterization"): "drugcharacterization",
    ("patient", "drug", "activesubstance", "activesubstancename"): "activesubstancename",
    ("patient", "drug", "activesubstancename"): "activesubstancename",
    ("patient", "reaction", "reactionmeddrapt"): "reactionmeddrapt",
}


class FaersParseError(ValueError):
    """Fatal error reading FAERS XML."""


class MalformedXMLError(FaersParseError):
    def __init__(self, message: str, offset: int, line: int | None = None, column: int | None = None):
        super().__init__(f"malformed XML at byte {offset}: {message}")
        self.offset = offset
        self.line = line
        self.column = column


class MissingRootError(FaersParseError):
    def __init__(self):
        super().__init__("document has no root element")
        self.offset = 0


class SchemaViolation(ValueError):
    """A canonical JSON document does not match the expected shape."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class MalformedJSONError(ValueError):
    pass


@dataclass
class ParseStats:
    reports: int = 0
    skipped: Counter = field(default_factory=Counter)
    dropped_records: int = 0  # drug/reaction elements without a name or term


@dataclass(frozen=True)
class DropRecord:
    report: str
    reasons: tuple[str, ...]


@dataclass(frozen=True)
class CanonicalBatch:
    source_label: str
    reports: tuple[SafetyReport, ...] = ()
    drop_log: tuple[DropRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "reports", tuple(self.reports))
        object.__setattr__(self, "drop_log", tuple(self.drop_log))

    def head(self, n: int) -> "CanonicalBatch":
        return CanonicalBatch(self.source_label, self.reports[:n], self.drop_log)


def _local(name: str) -> str:
    return name.rpartition(":")[2].lower()


class _ReportBuilder:
    def __init__(self, stats: ParseStats):
        self.stats = stats
        self.fields: dict[str, str] = {}
        self.patient: dict[str, str] = {}
        self.drugs: list[DrugRecord] = []
        self.reactions: list[ReactionRecord] = []
        self._drug: dict[str, Any] | None = None
        self._reaction: str | None = None

    def open(self, path: tuple[str, ...]) -> None:
        if path == ("patient", "drug"):
            self._drug = {"substances": []}
        elif path == ("patient", "reaction"):
            self._reaction = None

    def close(self, path: tuple[str, ...]) -> None:
        if path == ("patient", "drug"):
            drug, self._drug = self._drug, None
            name = (drug.get("medicinalproduct") or "").strip()
            if name:
                self.drugs.append(DrugRecord(name, drug.get("drugcharacterization"), tuple(drug["substances"])))
            else:
                self.stats.dropped_records += 1
        elif path == ("patient", "reaction"):
            if self._reaction:
                self.reactions.append(ReactionRecord(self._reaction))
            else:
                self.stats.dropped_records += 1

    def leaf(self, name: str, text: str) -> None:
        text = text.strip()
        if not text:
            return
        if name == "activesubstancename":
            if self._drug is not None:
                self._drug["substances"].append(text)
        elif name in ("medicinalproduct", "drugcharacterization"):
            if self._drug is not None:
                self._drug.setdefault(name, text)
        elif name == "reactionmeddrapt":
            if self._reaction is None:
                self._reaction = text
        elif name.startswith("patient"):
            self.patient.setdefault(name, text)
        else:
            self.fields.setdefault(name, text)

    def build(self) -> SafetyReport:
        p = self.patient
        patient = PatientRecord(
            onset_age=p.get("patientonsetage"),
            onset_age_unit=p.get("patientonsetageunit"),
            age_group=p.get("patientagegroup"),
            sex=p.get("patientsex"),
            drugs=tuple(self.drugs),
            reactions=tuple(self.reactions),
        )
        return SafetyReport(
            report_id=self.fields.get("safetyreportid", ""),
            receive_date=self.fields.get("receivedate"),
            serious=self.fields.get("serious"),
            patient=patient,
        )


def parse_faers_xml(source: IO[bytes], stats: ParseStats | None = None) -> Iterator[SafetyReport]:
    """Stream :class:`SafetyReport` records out of a FAERS XML document.

    Only one report is materialized at a time. Element names are matched
    case-insensitively and namespace prefixes are ignored. Reports are
    yielded unvalidated; pass them through :func:`filter_reports`.
    """
    stats = stats if stats is not None else ParseStats()
    parser = expat.ParserCreate()
    parser.buffer_text = True

    ready: list[SafetyReport] = []
    stack: list[str] = []  # element names from the document root
    state: dict[str, Any] = {"root": False, "report_depth": None, "skip_depth": None, "builder": None, "text": None}

    def rel_path() -> tuple[str, ...]:
        return tuple(stack[state["report_depth"] + 1:])

    def start(name, attrs):
        tag = _local(name)
        stack.append(tag)
        depth = len(stack) - 1
        if not state["root"]:
            state["root"] = True
            return
        if state["skip_depth"] is not None:
            return
        if state["report_depth"] is None:
            if tag == REPORT_TAG:
                state["report_depth"] = depth
                state["builder"] = _ReportBuilder(stats)
            else:
                # descend so that reports under wrapper elements are still found
                stats.skipped[tag] += 1
            return
        path = rel_path()
        if path in _CONTAINERS:
            state["builder"].open(path)
        elif path in _LEAVES:
            state["text"] = []
        else:
            stats.skipped[tag] += 1
            state["skip_depth"] = depth

    def end(name):
        depth = len(stack) - 1
        if state["skip_depth"] is not None:
            if depth == state["skip_depth"]:
                state["skip_depth"] = None
            stack.pop()
            return
        if state["report_depth"] is not None:
            if depth == state["report_depth"]:
                ready.append(state["builder"].build())
                stats.reports += 1
                state["report_depth"] = None
                state["builder"] = None
            else:
                path = rel_path()
                if path in _LEAVES and state["text"] is not None:
                    state["builder"].leaf(_LEAVES[path], "".join(state["text"]))
                    state["text"] = None
                elif path in _CONTAINERS:
                    state["builder"].close(path)
        stack.pop()

    def chars(data):
        if state["text"] is not None and state["skip_depth"] is None:
            state["text"].append(data)

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars

    def feed(data: bytes, final: bool) -> None:
        try:
            parser.Parse(data, final)
        except expat.ExpatError as exc:
            if not state["root"]:
                raise MissingRootError() from exc
            raise MalformedXMLError(
                expat.ErrorString(exc.code), parser.ErrorByteIndex, exc.lineno, exc.offset
            ) from exc

    while True:
        chunk = source.read(CHUNK_SIZE)
        if not chunk:
            break
        feed(chunk, False)
        yield from ready
        ready.clear()
    feed(b"", True)
    yield from ready
    ready.clear()


def filter_reports(raw: Iterable[SafetyReport], source_label: str = "") -> CanonicalBatch:
    """Keep complete reports in input order and log every exclusion."""
    kept: list[SafetyReport] = []
    drops: list[DropRecord] = []
    for ordinal, report in enumerate(raw, 1):
        outcome = validate_report(report)
        if outcome.kept:
            kept.append(report)
        else:
            drops.append(DropRecord(report.report_id.strip() or f"#{ordinal}", outcome.reasons))
    return CanonicalBatch(source_label, tuple(kept), tuple(drops))


# -- canonical JSON ----------------------------------------------------------

def _optional(d: dict, key: str, value: str | None) -> None:
    if value is not None:
        d[key] = value


def report_to_dict(report: SafetyReport) -> dict[str, Any]:
    p = report.patient
    patient: dict[str, Any] = {}
    _optional(patient, "patientonsetage", p.onset_age)
    _optional(patient, "patientonsetageunit", p.onset_age_unit)
    _optional(patient, "patientagegroup", p.age_group)
    _optional(patient, "patientsex", p.sex)
    drugs = []
    for drug in p.drugs:
        d: dict[str, Any] = {"medicinalproduct": drug.medicinal_product}
        _optional(d, "drugcharacterization", drug.characterization)
        d["activesubstances"] = list(drug.active_substances)
        drugs.append(d)
    patient["drugs"] = drugs
    patient["reactions"] = [{"reactionmeddrapt": r.term} for r in p.reactions]

    out: dict[str, Any] = {"safetyreportid": report.report_id}
    _optional(out, "receivedate", report.receive_date)
    _optional(out, "serious", report.serious)
    out["patient"] = patient
    return out


def batch_to_dict(batch: CanonicalBatch) -> dict[str, Any]:
    return {
        "source_label": batch.source_label,
        "safetyreports": [report_to_dict(r) for r in batch.reports],
        "droplog": [{"report": d.report, "reasons": list(d.reasons)} for d in batch.drop_log],
    }


def dumps_canonical(batch: CanonicalBatch) -> bytes:
    text = json.dumps(batch_to_dict(batch), ensure_ascii=False, indent=2)
    return (text + "\n").encode("utf-8")


def write_canonical_json(batch: CanonicalBatch, output: IO[bytes]) -> int:
    data = dumps_canonical(batch)
    output.write(data)
    return len(data)


def _expect(value: Any, kind: type, path: str) -> Any:
    if not isinstance(value, kind) or (kind is int and isinstance(value, bool)):
        raise SchemaViolation(path, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _required(obj: dict, key: str, kind: type, path: str) -> Any:
    if key not in obj:
        raise SchemaViolation(f"{path}.{key}", "required key is missing")
    return _expect(obj[key], kind, f"{path}.{key}")


def _opt_str(obj: dict, key: str, path: str) -> str | None:
    if key not in obj:
        return None
    return _expect(obj[key], str, f"{path}.{key}")


def _string_list(value: Any, path: str) -> tuple[str, ...]:
    _expect(value, list, path)
    return tuple(_expect(v, str, f"{path}[{i}]") for i, v in enumerate(value))


def _report_from_dict(obj: Any, path: str) -> SafetyReport:
    _expect(obj, dict, path)
    pobj = _required(obj, "patient", dict, path)
    ppath = f"{path}.patient"
    drugs = []
    for i, d in enumerate(_required(pobj, "drugs", list, ppath)):
        dpath = f"{ppath}.drugs[{i}]"
        _expect(d, dict, dpath)
        try:
            drugs.append(DrugRecord(
                _required(d, "medicinalproduct", str, dpath),
                _opt_str(d, "drugcharacterization", dpath),
                _string_list(d.get("activesubstances", []), f"{dpath}.activesubstances"),
            ))
        except SchemaViolation:
            raise
        except ValueError as exc:
            raise SchemaViolation(dpath, str(exc)) from exc
    reactions = []
    for i, r in enumerate(_required(pobj, "reactions", list, ppath)):
        rpath = f"{ppath}.reactions[{i}]"
        _expect(r, dict, rpath)
        term = _required(r, "reactionmeddrapt", str, rpath)
        if not term.strip():
            raise SchemaViolation(f"{rpath}.reactionmeddrapt", "reaction term must be non-empty")
        reactions.append(ReactionRecord(term))
    try:
        patient = PatientRecord(
            onset_age=_opt_str(pobj, "patientonsetage", ppath),
            onset_age_unit=_opt_str(pobj, "patientonsetageunit", ppath),
            age_group=_opt_str(pobj, "patientagegroup", ppath),
            sex=_opt_str(pobj, "patientsex", ppath),
            drugs=tuple(drugs),
            reactions=tuple(reactions),
        )
    except SchemaViolation:
        raise
    except ValueError as exc:
        raise SchemaViolation(ppath, str(exc)) from exc
    return SafetyReport(
        report_id=_required(obj, "safetyreportid", str, path),
        receive_date=_opt_str(obj, "receivedate", path),
        serious=_opt_str(obj, "serious", path),
        patient=patient,
    )


def batch_from_dict(doc: Any) -> CanonicalBatch:
    _expect(doc, dict, "$")
    label = _required(doc, "source_label", str, "$")
    reports = tuple(
        _report_from_dict(r, f"$.safetyreports[{i}]")
        for i, r in enumerate(_required(doc, "safetyreports", list, "$"))
    )
    drops = []
    for i, d in enumerate(_expect(doc.get("droplog", []), list, "$.droplog")):
        dpath = f"$.droplog[{i}]"
        _expect(d, dict, dpath)
        drops.append(DropRecord(
            _required(d, "report", str, dpath),
            _string_list(_required(d, "reasons", list, dpath), f"{dpath}.reasons"),
        ))
    return CanonicalBatch(label, reports, tuple(drops))


def read_canonical_json(source: IO[bytes]) -> CanonicalBatch:
    try:
        doc = json.load(source)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedJSONError(f"malformed JSON: {exc}") from exc
    return batch_from_dict(doc)
