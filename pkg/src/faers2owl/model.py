"""Case-report records and coded-vocabulary decoding.

Field names in the canonical JSON mirror the lowercased FAERS XML element
names; the Python attributes use readable names and the mapping lives in
:mod:`faers2owl.faers`.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

MISSING_DRUG = "missing_drug"
MISSING_REACTION = "missing_reaction"
MISSING_REPORT_ID = "missing_report_id"

AGE_GROUP_FIELD = "patientagegroup"
AGE_GROUP_TERMS = {
    "1": "Neonate",
    "2": "Infant",
    "3": "Child",
    "4": "Adolescent",
    "5": "Adult",
    "6": "Elderly",
}


class UnknownCodeWarning(UserWarning):
    """A code was looked up in a vocabulary table that does not contain it."""

    def __init__(self, field_name: str, code: str):
        super().__init__(f"unknown code {code!r} for field {field_name!r}")
        self.field_name = field_name
        self.code = code


@dataclass(frozen=True)
class DrugRecord:
    medicinal_product: str
    characterization: str | None = None
    active_substances: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.medicinal_product.strip():
            raise ValueError("medicinal_product must be non-empty")
        object.__setattr__(self, "active_substances", tuple(self.active_substances))
        if any(not s.strip() for s in self.active_substances):
            raise ValueError("active substance names must be non-empty")


@dataclass(frozen=True)
class ReactionRecord:
    term: str

    def __post_init__(self):
        if not self.term.strip():
            raise ValueError("reaction term must be non-empty")


@dataclass(frozen=True)
class PatientRecord:
    # Numeric-looking fields are kept as source text so the JSON form round-trips exactly.
    onset_age: str | None = None
    onset_age_unit: str | None = None
    age_group: str | None = None
    sex: str | None = None
    drugs: tuple[DrugRecord, ...] = ()
    reactions: tuple[ReactionRecord, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "drugs", tuple(self.drugs))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        if self.onset_age is not None:
            try:
                age = float(self.onset_age)
            except ValueError:
                age = None
            if age is not None and age < 0:
                raise ValueError(f"onset age must be non-negative, got {self.onset_age!r}")


@dataclass(frozen=True)
class SafetyReport:
    report_id: str
    receive_date: str | None = None
    serious: str | None = None
    patient: PatientRecord = field(default_factory=PatientRecord)


@dataclass(frozen=True)
class ValidationOutcome:
    reasons: tuple[str, ...] = ()

    @property
    def kept(self) -> bool:
        return not self.reasons


def validate_report(report: SafetyReport) -> ValidationOutcome:
    """Check that a report names at least one drug, one reaction and an id."""
    reasons = []
    if not report.patient.drugs:
        reasons.append(MISSING_DRUG)
    if not report.patient.reactions:
        reasons.append(MISSING_REACTION)
    if not report.report_id.strip():
        reasons.append(MISSING_REPORT_ID)
    return ValidationOutcome(tuple(reasons))


@dataclass(frozen=True)
class VocabularyTable:
    field_name: str
    entries: Mapping[str, str]

    def __post_init__(self):
        object.__setattr__(self, "entries", dict(self.entries))


def parse_vocabulary(lines: Iterable[str], field_name: str) -> VocabularyTable:
    """Read ``code<TAB>term`` lines; ``#`` lines and blank lines are ignored."""
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        code, sep, term = line.partition("\t")
        code, term = code.strip(), term.strip()
        if not sep or not code or not term:
            raise ValueError(f"{field_name}:{lineno}: expected 'code<TAB>term', got {line!r}")
        if code in entries:
            raise ValueError(f"{field_name}:{lineno}: duplicate code {code!r}")
        entries[code] = term
    return VocabularyTable(field_name, entries)


def load_vocabulary(path: str | Path, field_name: str | None = None) -> VocabularyTable:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_vocabulary(fh, field_name or path.stem.lower())


class VocabularySet:
    """At most one table per coded field, with the age-group table built in."""

    def __init__(self, tables: Iterable[VocabularyTable] = (), *, builtin: bool = True):
        self.tables: dict[str, VocabularyTable] = {}
        if builtin:
            self.add(VocabularyTable(AGE_GROUP_FIELD, AGE_GROUP_TERMS))
        for table in tables:
            self.add(table)

    def add(self, table: VocabularyTable) -> None:
        # user-supplied tables replace built-in defaults for the same field
        self.tables[table.field_name.lower()] = table

    @classmethod
    def from_directory(cls, directory: str | Path) -> "VocabularySet":
        """Load every ``*.tsv`` / ``*.txt`` file; the file stem names the field."""
        directory = Path(directory)
        paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in (".tsv", ".txt"))
        return cls(load_vocabulary(p) for p in paths)

    def decode(self, field_name: str, code: str) -> str:
        return decode_code(field_name, code, self)


def decode_code(field_name: str, code: str, tables: VocabularySet) -> str:
    """Map ``code`` to its vocabulary term.

    Fields without a table pass through unchanged. A code missing from an
    existing table emits :class:`UnknownCodeWarning` and is returned as-is,
    so one irregular value never aborts a batch.
    """
    table = tables.tables.get(field_name.lower())
    if table is None:
        return code
    term = table.entries.get(code.strip())
    if term is None:
        warnings.warn(UnknownCodeWarning(field_name, code), stacklevel=2)
        return code
    return term
