"""Join the three annual VAERS CSV files into per-patient cases."""
from __future__ import annotations

import csv
import io
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence

log = logging.getLogger(__name__)

DATA, SYMPTOMS, VACCINES = "data", "symptoms", "vaccines"
FILES = (DATA, SYMPTOMS, VACCINES)


class VaersFormatError(ValueError):
    def __init__(self, file_label: str, message: str):
        super().__init__(f"{file_label}: {message}")
        self.file_label = file_label


@dataclass(frozen=True)
class VaersColumns:
    id_column: str = "VAERS_ID"
    symptom_columns: tuple[str, ...] = tuple(f"SYMPTOM{i}" for i in range(1, 6))
    vaccine_column: str = "VAX_TYPE"
    encoding: str = "utf-8"
    fallback_encoding: str = "latin-1"


@dataclass(frozen=True)
class VaersCase:
    vaers_id: str
    symptoms: frozenset[str] = frozenset()
    vaccines: frozenset[str] = frozenset()

    def __post_init__(self):
        if not self.vaers_id.strip():
            raise ValueError("vaers_id must be non-empty")
        object.__setattr__(self, "symptoms", frozenset(self.symptoms))
        object.__setattr__(self, "vaccines", frozenset(self.vaccines))


@dataclass
class VaersJoin:
    cases: tuple[VaersCase, ...]
    orphans: dict[str, list[str]] = field(default_factory=dict)
    skipped: Counter = field(default_factory=Counter)


def _decode(raw: bytes, columns: VaersColumns) -> str:
    try:
        return raw.decode(columns.encoding)
    except UnicodeDecodeError:
        log.warning("input is not valid %s, decoding as %s", columns.encoding, columns.fallback_encoding)
        return raw.decode(columns.fallback_encoding)


def _rows(
    stream: IO[bytes], label: str, columns: VaersColumns, skipped: Counter
) -> tuple[dict[str, int], Iterator[list[str]]]:
    text = _decode(stream.read(), columns)
    reader = csv.reader(io.StringIO(text, newline=""))
    header = next(reader, None)
    if header is None:
        raise VaersFormatError(label, "empty file, expected a header row")
    index = {name.strip().lstrip("\ufeff").upper(): i for i, name in enumerate(header)}
    width = len(header)

    def body() -> Iterator[list[str]]:
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != width:
                skipped[label] += 1
                log.warning("%s line %d: expected %d fields, got %d; row skipped", label, lineno, width, len(row))
                continue
            yield row

    return index, body()


def _column(index: dict[str, int], name: str, label: str) -> int:
    try:
        return index[name.upper()]
    except KeyError:
        raise VaersFormatError(label, f"missing column {name!r}") from None


def _sort_key(vaers_id: str):
    return (0, int(vaers_id), "") if vaers_id.isdigit() else (1, 0, vaers_id)


def parse_vaers_files(
    data_csv: IO[bytes],
    symptoms_csv: IO[bytes],
    vaccine_csv: IO[bytes],
    columns: VaersColumns | None = None,
) -> VaersJoin:
    """Outer-join the data, symptoms and vaccine files on the VAERS ID.

    IDs found only in the symptoms or vaccine file still produce a case and
    are listed in ``orphans``. Rows whose field count differs from the
    header are skipped and counted per file.
    """
    columns = columns or VaersColumns()
    skipped: Counter = Counter()

    index, rows = _rows(data_csv, DATA, columns, skipped)
    id_col = _column(index, columns.id_column, DATA)
    known: set[str] = set()
    for row in rows:
        vid = row[id_col].strip()
        if vid:
            known.add(vid)

    symptoms: dict[str, set[str]] = {}
    index, rows = _rows(symptoms_csv, SYMPTOMS, columns, skipped)
    id_col = _column(index, columns.id_column, SYMPTOMS)
    sym_cols = [index[c.upper()] for c in columns.symptom_columns if c.upper() in index]
    if not sym_cols:
        raise VaersFormatError(SYMPTOMS, f"none of the symptom columns {list(columns.symptom_columns)} found")
    for row in rows:
        vid = row[id_col].strip()
        if not vid:
            skipped[SYMPTOMS] += 1
            continue
        bucket = symptoms.setdefault(vid, set())
        bucket.update(v for v in (row[i].strip() for i in sym_cols) if v)

    vaccines: dict[str, set[str]] = {}
    index, rows = _rows(vaccine_csv, VACCINES, columns, skipped)
    id_col = _column(index, columns.id_column, VACCINES)
    vax_col = _column(index, columns.vaccine_column, VACCINES)
    for row in rows:
        vid = row[id_col].strip()
        if not vid:
            skipped[VACCINES] += 1
            continue
        bucket = vaccines.setdefault(vid, set())
        if row[vax_col].strip():
            bucket.add(row[vax_col].strip())

    orphans = {
        SYMPTOMS: sorted(set(symptoms) - known, key=_sort_key),
        VACCINES: sorted(set(vaccines) - known, key=_sort_key),
    }
    all_ids = known | set(symptoms) | set(vaccines)
    cases = tuple(
        VaersCase(vid, frozenset(symptoms.get(vid, ())), frozenset(vaccines.get(vid, ())))
        for vid in sorted(all_ids, key=_sort_key)
    )
    for label in FILES:
        skipped.setdefault(label, 0)
    return VaersJoin(cases, orphans, skipped)


def join_report(
    cases: Sequence[VaersCase], orphans: dict[str, Iterable[str]], skipped: Counter | dict | None = None
) -> str:
    orphans = {k: list(v) for k, v in orphans.items()}
    skipped = Counter(skipped or {})
    total_orphans = len({vid for ids in orphans.values() for vid in ids})
    lines = [f"{len(cases)} cases, {total_orphans} orphans"]
    for label in sorted(orphans):
        ids = orphans[label]
        shown = ", ".join(ids[:10]) + (", ..." if len(ids) > 10 else "")
        detail = f" ({shown})" if ids else ""
        lines.append(f"  orphans in {label} file: {len(ids)}{detail}")
    lines.append(f"  skipped={sum(skipped.values())} " + " ".join(f"{k}={skipped[k]}" for k in FILES))
    return "\n".join(lines)
