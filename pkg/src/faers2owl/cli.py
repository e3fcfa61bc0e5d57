"""Command-line front end: fetch, convert, cypher, owl, vaers, config show."""
from __future__ import annotations

import argparse
import io
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .acquire import (
    AcquireError,
    DiskFullError,
    FetchError,
    QuarterRef,
    TemplateError,
    extract_archive,
    fetch_quarter,
)
from .config import ConfigError, PipelineConfig
from .faers import (
    CanonicalBatch,
    FaersParseError,
    MalformedJSONError,
    ParseStats,
    SchemaViolation,
    filter_reports,
    parse_faers_xml,
    read_canonical_json,
    write_canonical_json,
)
from .graph import build_vaers_graph, emit_cypher_script, emit_vaers_cypher, graph_stats
from .ontology import build_ontology
from .rdf import serialize_rdfxml, serialize_turtle
from .vaers import VaersFormatError, join_report, parse_vaers_files

EX_OK = 0
EX_DATAERR = 2
EX_USAGE = 64
EX_UNAVAILABLE = 69
EX_IOERR = 74

log = logging.getLogger("faers2owl")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class OutputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _read_input(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from exc


def _write_output(path: str | Path, data: bytes) -> None:
    try:
        Path(path).write_bytes(data)
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_batch(path: str) -> CanonicalBatch:
    try:
        return read_canonical_json(io.BytesIO(_read_input(path)))
    except (SchemaViolation, MalformedJSONError) as exc:
        raise DataError(f"{path}: {exc}") from exc


def cmd_convert(args, config: PipelineConfig) -> int:
    stats = ParseStats()
    reports = []
    for path in args.input:
        data = _read_input(path)
        try:
            reports.extend(parse_faers_xml(io.BytesIO(data), stats))
        except FaersParseError as exc:
            raise DataError(f"{path}: {exc}") from exc
    label = args.source_label or Path(args.input[0]).stem
    batch = filter_reports(reports, source_label=label)
    buf = io.BytesIO()
    write_canonical_json(batch, buf)
    _write_output(args.output, buf.getvalue())
    if args.drop_log:
        drops = [{"report": d.report, "reasons": list(d.reasons)} for d in batch.drop_log]
        _write_output(args.drop_log, (json.dumps(drops, ensure_ascii=False, indent=2) + "\n").encode("utf-8"))
    if stats.skipped:
        log.info("skipped elements: %s", dict(sorted(stats.skipped.items())))
    print(f"kept={len(batch.reports)} dropped={len(batch.drop_log)}", file=sys.stderr)
    return EX_OK


def cmd_cypher(args, config: PipelineConfig) -> int:
    batch = _load_batch(args.input)
    buf = io.BytesIO()
    count = emit_cypher_script(
        batch, buf, vocab=config.vocabulary(), statement_size=config.get_int("cypher.statement_size")
    )
    _write_output(args.output, buf.getvalue())
    print(f"statements={count}", file=sys.stderr)
    return EX_OK


def cmd_owl(args, config: PipelineConfig) -> int:
    if args.limit is not None and args.limit < 0:
        raise UsageError("--limit must be non-negative")
    batch = _load_batch(args.input)
    if args.limit is not None:
        batch = batch.head(args.limit)
    graph = build_ontology(batch, config.ontology())
    stem = Path(args.output_stem)
    if args.format in ("ttl", "both"):
        buf = io.BytesIO()
        serialize_turtle(graph, buf)
        _write_output(stem.with_name(stem.name + ".ttl"), buf.getvalue())
    if args.format in ("owl", "both"):
        buf = io.BytesIO()
        serialize_rdfxml(graph, buf)
        _write_output(stem.with_name(stem.name + ".owl"), buf.getvalue())
    print(f"triples={len(graph)}", file=sys.stderr)
    return EX_OK


def cmd_vaers(args, config: PipelineConfig) -> int:
    streams = [io.BytesIO(_read_input(p)) for p in (args.data, args.symptoms, args.vaccines)]
    try:
        joined = parse_vaers_files(*streams, columns=config.vaers_columns())
    except VaersFormatError as exc:
        path = {"data": args.data, "symptoms": args.symptoms, "vaccines": args.vaccines}[exc.file_label]
        raise DataError(f"{path}: {exc}") from exc
    print(join_report(joined.cases, joined.orphans, joined.skipped), file=sys.stderr)
    kind = args.format
    if kind is None:
        kind = "cypher" if Path(args.output).suffix.lower() in (".cypher", ".cql") else "stats"
    if kind == "cypher":
        buf = io.BytesIO()
        count = emit_vaers_cypher(
            joined.cases, buf, source_label=args.source_label or Path(args.data).stem,
            statement_size=config.get_int("cypher.statement_size"),
        )
        _write_output(args.output, buf.getvalue())
        print(f"statements={count}", file=sys.stderr)
    else:
        stats = graph_stats(build_vaers_graph(joined.cases))
        text = json.dumps(stats.to_dict(), ensure_ascii=False, indent=2) + "\n"
        _write_output(args.output, text.encode("utf-8"))
    return EX_OK


def cmd_fetch(args, config: PipelineConfig) -> int:
    try:
        ref = QuarterRef(args.year, args.quarter)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    dest = Path(args.dest_dir or config["acquire.dest_dir"])
    try:
        fetched = fetch_quarter(
            ref, config["acquire.url_template"], dest, retries=config.get_int("acquire.retries")
        )
    except TemplateError as exc:
        raise UsageError(str(exc)) from exc
    print(f"{'cached' if fetched.cached else 'downloaded'} {fetched.path}", file=sys.stderr)
    if args.extract:
        for path in extract_archive(fetched.path, dest / fetched.path.stem):
            print(path)
    return EX_OK


def cmd_config_show(args, config: PipelineConfig) -> int:
    sys.stdout.write(config.show())
    return EX_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="key-value configuration file (section.key = value)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one configuration key; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="faers2owl", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", parents=[common], help="FAERS XML -> canonical JSON")
    p.add_argument("--input", nargs="+", required=True, metavar="XML")
    p.add_argument("--output", required=True, metavar="JSON")
    p.add_argument("--drop-log", metavar="PATH")
    p.add_argument("--source-label")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("cypher", parents=[common], help="canonical JSON -> Cypher import script")
    p.add_argument("--input", required=True, metavar="JSON")
    p.add_argument("--output", required=True, metavar="CYPHER")
    p.set_defaults(func=cmd_cypher)

    p = sub.add_parser("owl", parents=[common], help="canonical JSON -> OWL ontology")
    p.add_argument("--input", required=True, metavar="JSON")
    p.add_argument("--output-stem", required=True, metavar="STEM")
    p.add_argument("--limit", type=int, metavar="N", help="use only the first N reports")
    p.add_argument("--format", choices=("ttl", "owl", "both"), default="both")
    p.set_defaults(func=cmd_owl)

    p = sub.add_parser("vaers", parents=[common], help="VAERS CSV files -> Cypher script or graph stats")
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--symptoms", required=True, metavar="CSV")
    p.add_argument("--vaccines", required=True, metavar="CSV")
    p.add_argument("--output", required=True, metavar="PATH")
    p.add_argument("--format", choices=("cypher", "stats"),
                   help="default: cypher for .cypher/.cql outputs, stats otherwise")
    p.add_argument("--source-label")
    p.set_defaults(func=cmd_vaers)

    p = sub.add_parser("fetch", parents=[common], help="download a quarterly FAERS archive")
    p.add_argument("--year", type=int, required=True)
    p.add_argument("--quarter", type=int, required=True)
    p.add_argument("--dest-dir")
    p.add_argument("--extract", action="store_true", help="also unpack the XML members")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("config", help="inspect the resolved configuration")
    config_sub = p.add_subparsers(dest="config_command", required=True, parser_class=_Parser)
    show = config_sub.add_parser("show", parents=[common])
    show.set_defaults(func=cmd_config_show)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    logging.captureWarnings(True)
    try:
        config = PipelineConfig.resolve(args.config, args.set)
        return args.func(args, config)
    except (UsageError, ConfigError) as exc:
        print(f"faers2owl: {exc}", file=sys.stderr)
        return EX_USAGE
    except DataError as exc:
        print(f"faers2owl: {exc}", file=sys.stderr)
        return EX_DATAERR
    except FetchError as exc:
        print(f"faers2owl: {exc}", file=sys.stderr)
        return EX_UNAVAILABLE
    except (OutputError, DiskFullError) as exc:
        print(f"faers2owl: {exc}", file=sys.stderr)
        return EX_IOERR
    except AcquireError as exc:
        print(f"faers2owl: {exc}", file=sys.stderr)
        return EX_DATAERR
    finally:
        logging.captureWarnings(False)


if __name__ == "__main__":
    sys.exit(main())
