"""Synthetic data generators and independent oracles shared by the tests."""
from __future__ import annotations

import random
import re
from pathlib import Path
from xml.sax.saxutils import escape

from hypothesis import strategies as st

from faers2owl.faers import CanonicalBatch, filter_reports
from faers2owl.model import DrugRecord, PatientRecord, ReactionRecord, SafetyReport

FIXTURES = Path(__file__).parent / "fixtures"

DRUG_NAMES = [
    "Aspirin", "ASPIRIN", " aspirin ", "Warfarin Sodium", "warfarin  sodium", "Metformin",
    "O'Brien's 5\"", "back\\slash", "Café au lait", "阿司匹林", "A/B", "A_B", "Ibuprofen 200 mg",
]
SUBSTANCES = ["ACETYLSALICYLIC ACID", "WARFARIN", "METFORMIN HCL", "IBUPROFEN", "CAFFEINE", "ß-blocker"]
TERMS = [
    "Headache", "HEADACHE", "Nausea", "Heart attack", "Rash", "Dizziness", "Pruritus",
    "Gastrointestinal haemorrhage", "Hépatite", "Drug \"interaction\"",
]


def norm(text: str) -> str:
    # written independently of faers2owl.graph.normalize_name
    return re.sub(r"\s+", " ", text.strip()).upper()


def random_report(rng: random.Random, ident: str, p_missing: float = 0.2) -> SafetyReport:
    drugs = []
    if rng.random() >= p_missing:
        for _ in range(rng.randint(1, 4)):
            subs = tuple(rng.sample(SUBSTANCES, rng.randint(0, 2)))
            drugs.append(DrugRecord(rng.choice(DRUG_NAMES), rng.choice([None, "1", "2", "3"]), subs))
    reactions = []
    if rng.random() >= p_missing:
        reactions = [ReactionRecord(rng.choice(TERMS)) for _ in range(rng.randint(1, 3))]
    report_id = "" if rng.random() < p_missing / 4 else ident
    patient = PatientRecord(
        onset_age=rng.choice([None, "34", "71.5"]),
        onset_age_unit=rng.choice([None, "801"]),
        age_group=rng.choice([None, "1", "3", "5", "6"]),
        sex=rng.choice([None, "1", "2"]),
        drugs=tuple(drugs),
        reactions=tuple(reactions),
    )
    return SafetyReport(report_id, rng.choice([None, "20231015", "2023"]), rng.choice([None, "1", "2"]), patient)


def random_reports(n: int, seed: int, p_missing: float = 0.2) -> list[SafetyReport]:
    rng = random.Random(seed)
    return [random_report(rng, f"{seed}-{i}", p_missing) for i in range(n)]


def random_batch(n: int, seed: int) -> CanonicalBatch:
    return filter_reports(random_reports(n, seed), source_label=f"synthetic-{seed}")


def report_xml(report: SafetyReport) -> str:
    def leaf(tag, value):
        return f"<{tag}>{escape(value)}</{tag}>" if value is not None else ""

    p = report.patient
    drugs = "".join(
        "<drug>" + leaf("drugcharacterization", d.characterization) + leaf("medicinalproduct", d.medicinal_product)
        + "".join(f"<activesubstance>{leaf('activesubstancename', s)}</activesubstance>" for s in d.active_substances)
        + "<drugdosagetext>as directed</drugdosagetext></drug>"
        for d in p.drugs
    )
    reactions = "".join(f"<reaction>{leaf('reactionmeddrapt', r.term)}</reaction>" for r in p.reactions)
    return (
        "<safetyreport>" + leaf("safetyreportversion", "1") + leaf("safetyreportid", report.report_id or None)
        + leaf("receivedate", report.receive_date) + leaf("serious", report.serious)
        + "<patient>" + leaf("patientonsetage", p.onset_age) + leaf("patientonsetageunit", p.onset_age_unit)
        + leaf("patientagegroup", p.age_group) + leaf("patientsex", p.sex)
        + drugs + reactions + "</patient></safetyreport>\n"
    )


def write_faers_xml(path: Path, reports) -> Path:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write('<?xml version="1.0" encoding="UTF-8"?>\n<ichicsr lang="en">\n')
        fh.write("<ichicsrmessageheader><messagenumb>SYNTH</messagenumb></ichicsrmessageheader>\n")
        for report in reports:
            fh.write(report_xml(report))
        fh.write("</ichicsr>\n")
    return path


# -- hypothesis strategies -----------------------------------------------------

_text = st.text(
    alphabet=st.sampled_from(list("abcXYZ 09-_/'\"\\é中\t")), min_size=1, max_size=12
).filter(lambda s: s.strip())

drugs_st = st.builds(
    DrugRecord,
    _text,
    st.none() | st.sampled_from(["1", "2", "3"]),
    st.lists(_text, max_size=3).map(tuple),
)
reports_st = st.builds(
    SafetyReport,
    st.text(alphabet="0123456789AB-", min_size=1, max_size=8),
    st.none() | st.sampled_from(["20230101", "202301", "2023"]),
    st.none() | st.sampled_from(["1", "2"]),
    st.builds(
        PatientRecord,
        st.none() | st.sampled_from(["0", "12", "45.5"]),
        st.none() | st.sampled_from(["800", "801"]),
        st.none() | st.sampled_from(["1", "2", "3", "4", "5", "6"]),
        st.none() | st.sampled_from(["0", "1", "2"]),
        st.lists(drugs_st, min_size=1, max_size=3).map(tuple),
        st.lists(st.builds(ReactionRecord, _text), min_size=1, max_size=3).map(tuple),
    ),
)
batches_st = st.builds(
    lambda reports, label: filter_reports(reports, source_label=label),
    st.lists(reports_st, max_size=6),
    st.text(max_size=10),
)


# -- ontology count oracle -----------------------------------------------------

def expected_instance_triples(batch: CanonicalBatch, pairwise: bool = True) -> int:
    """Count instance triples from the batch shape alone, using plain sets."""
    ids = {r.report_id.strip() for r in batch.reports}
    drugs, events, took, reported, substances, causal = set(), set(), set(), set(), set(), set()
    for r in batch.reports:
        rid = r.report_id.strip()
        names = {norm(d.medicinal_product) for d in r.patient.drugs}
        terms = {norm(x.term) for x in r.patient.reactions}
        drugs |= names
        events |= terms
        took |= {(rid, n) for n in names}
        reported |= {(rid, t) for t in terms}
        substances |= {(norm(d.medicinal_product), s.strip()) for d in r.patient.drugs for s in d.active_substances}
        causal |= {(n, t) for n in names for t in terms}
    total = 3 * len(ids) + len(drugs) + len(took) + len(substances) + len(events) + len(reported)
    return total + (len(causal) if pairwise else 0)
