"""A small RDF triple store with deterministic Turtle and RDF/XML output.

Only the Turtle subset written by :func:`serialize_turtle` (prefix
directives, IRIs, blank-node labels, plain and typed literals) is accepted
by :func:`parse_turtle`.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass
from typing import IO, Iterable, Iterator, Union
from xml.sax.saxutils import escape as xml_escape

_SCHEME = re.compile(r"[A-Za-z][A-Za-z0-9+.\-]*:")
_BAD_IRI_CHARS = re.compile(r'[\s<>"{}|^`\\]')
_BNODE_LABEL = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*\Z")
_PREFIX = re.compile(r"(?:[A-Za-z][A-Za-z0-9_\-]*)?\Z")
_PN_LOCAL = re.compile(r"(?:[A-Za-z0-9_]|%[0-9A-Fa-f]{2})(?:[A-Za-z0-9_\-]|%[0-9A-Fa-f]{2})*\Z")


class RDFError(ValueError):
    pass


class TermError(RDFError):
    pass


class UnsplittableIRIError(RDFError):
    pass


class TurtleSyntaxError(RDFError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class IRI:
    value: str

    def __post_init__(self):
        if not _SCHEME.match(self.value) or _BAD_IRI_CHARS.search(self.value):
            raise TermError(f"not an absolute IRI: {self.value!r}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class BNode:
    label: str

    def __post_init__(self):
        if not _BNODE_LABEL.match(self.label):
            raise TermError(f"bad blank node label: {self.label!r}")

    def __str__(self) -> str:
        return "_:" + self.label


@dataclass(frozen=True)
class Literal:
    lexical: str
    datatype: IRI | None = None

    def __str__(self) -> str:
        return self.lexical


Term = Union[IRI, BNode, Literal]
Triple = tuple[Term, Term, Term]


class Namespace(str):
    """``Namespace("http://x#").Foo == IRI("http://x#Foo")``"""

    def term(self, name: str) -> IRI:
        return IRI(str(self) + name)

    def __getattr__(self, name: str) -> IRI:
        if name.startswith("__"):
            raise AttributeError(name)
        return self.term(name)

    def __getitem__(self, name):  # type: ignore[override]
        if isinstance(name, str):
            return self.term(name)
        return str.__getitem__(self, name)


RDF = Namespace("http://www.w3.org/1999/02/22-rdf-syntax-ns#")
RDFS = Namespace("http://www.w3.org/2000/01/rdf-schema#")
OWL = Namespace("http://www.w3.org/2002/07/owl#")
XSD = Namespace("http://www.w3.org/2001/XMLSchema#")

STANDARD_PREFIXES = {"rdf": str(RDF), "rdfs": str(RDFS), "owl": str(OWL), "xsd": str(XSD)}


def term_sort_key(term: Term) -> tuple:
    if isinstance(term, IRI):
        return (0, term.value, "")
    if isinstance(term, BNode):
        return (1, term.label, "")
    return (2, term.lexical, term.datatype.value if term.datatype else "")


def triple_sort_key(triple: Triple) -> tuple:
    return tuple(term_sort_key(t) for t in triple)


class TripleGraph:
    """A set of triples plus prefix bindings.

    Blank nodes are allocated per graph as ``b0, b1, ...``.
    """

    def __init__(self, namespaces: dict[str, str] | None = None):
        self._triples: dict[Triple, None] = {}
        self.namespaces: dict[str, str] = dict(STANDARD_PREFIXES)
        self._next_bnode = 0
        for prefix, iri in (namespaces or {}).items():
            self.bind(prefix, iri)

    def bind(self, prefix: str, iri: str) -> None:
        if not _PREFIX.match(prefix):
            raise RDFError(f"bad prefix name {prefix!r}")
        if prefix in STANDARD_PREFIXES and STANDARD_PREFIXES[prefix] != str(iri):
            raise RDFError(f"prefix {prefix!r} is reserved for {STANDARD_PREFIXES[prefix]}")
        IRI(str(iri))
        self.namespaces[prefix] = str(iri)

    def new_blank_node(self) -> BNode:
        node = BNode(f"b{self._next_bnode}")
        self._next_bnode += 1
        return node

    def add(self, s: Term, p: Term, o: Term) -> bool:
        if isinstance(s, Literal):
            raise TermError(f"literal cannot be a subject: {s!r}")
        if not isinstance(s, (IRI, BNode)):
            raise TermError(f"bad subject {s!r}")
        if not isinstance(p, IRI):
            raise TermError(f"predicate must be an IRI, got {p!r}")
        if not isinstance(o, (IRI, BNode, Literal)):
            raise TermError(f"bad object {o!r}")
        triple = (s, p, o)
        if triple in self._triples:
            return False
        if isinstance(s, BNode):
            self._reserve(s)
        if isinstance(o, BNode):
            self._reserve(o)
        self._triples[triple] = None
        return True

    def _reserve(self, node: BNode) -> None:
        m = re.fullmatch(r"b(\d+)", node.label)
        if m and int(m.group(1)) >= self._next_bnode:
            self._next_bnode = int(m.group(1)) + 1

    def update(self, triples: Iterable[Triple]) -> int:
        return sum(self.add(*t) for t in triples)

    def copy(self) -> "TripleGraph":
        other = TripleGraph(self.namespaces)
        other._triples = dict(self._triples)
        other._next_bnode = self._next_bnode
        return other

    def triples(self, s: Term | None = None, p: Term | None = None, o: Term | None = None) -> Iterator[Triple]:
        for t in self._triples:
            if (s is None or t[0] == s) and (p is None or t[1] == p) and (o is None or t[2] == o):
                yield t

    def objects(self, s: Term, p: Term) -> Iterator[Term]:
        return (t[2] for t in self.triples(s, p))

    def subjects(self, p: Term, o: Term) -> Iterator[Term]:
        return (t[0] for t in self.triples(None, p, o))

    def sorted_triples(self) -> list[Triple]:
        return sorted(self._triples, key=triple_sort_key)

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self._triples)

    def __contains__(self, triple: object) -> bool:
        return triple in self._triples

    def __repr__(self) -> str:
        return f"<TripleGraph triples={len(self)}>"


def isomorphic(a: TripleGraph, b: TripleGraph) -> bool:
    """Triple-set equality up to a bijective renaming of blank nodes."""
    if len(a) != len(b):
        return False
    ground_a = {t for t in a if not any(isinstance(x, BNode) for x in t)}
    ground_b = {t for t in b if not any(isinstance(x, BNode) for x in t)}
    if ground_a != ground_b:
        return False
    rest_a = [t for t in a if t not in ground_a]
    rest_b = {t for t in b if t not in ground_b}
    nodes_a = sorted({x for t in rest_a for x in t if isinstance(x, BNode)}, key=lambda n: n.label)
    nodes_b = {x for t in rest_b for x in t if isinstance(x, BNode)}
    if len(nodes_a) != len(nodes_b):
        return False

    def signature(node, triples):
        def slot(x):
            if x == node:
                return ("self",)
            if isinstance(x, BNode):
                return ("blank",)
            return ("term",) + term_sort_key(x)

        return sorted(tuple(slot(x) for x in t) for t in triples if node in t)

    sig_b: dict = {}
    for n in nodes_b:
        sig_b.setdefault(tuple(signature(n, rest_b)), []).append(n)
    candidates = {n: sig_b.get(tuple(signature(n, rest_a)), []) for n in nodes_a}

    def rename(t, mapping):
        return tuple(mapping.get(x, x) if isinstance(x, BNode) else x for x in t)

    def search(i: int, mapping: dict, used: set) -> bool:
        if i == len(nodes_a):
            return {rename(t, mapping) for t in rest_a} == rest_b
        node = nodes_a[i]
        for cand in candidates[node]:
            if cand in used:
                continue
            mapping[node] = cand
            used.add(cand)
            # prune: every fully-mapped triple must exist in b
            ok = all(
                rename(t, mapping) in rest_b
                for t in rest_a
                if node in t and all(not isinstance(x, BNode) or x in mapping for x in t)
            )
            if ok and search(i + 1, mapping, used):
                return True
            del mapping[node]
            used.discard(cand)
        return False

    return search(0, {}, set())


# -- Turtle ------------------------------------------------------------------

_TTL_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t", "\b": "\\b", "\f": "\\f"}


def _ttl_string(text: str) -> str:
    out = []
    for ch in text:
        if ch in _TTL_ESCAPES:
            out.append(_TTL_ESCAPES[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


class _Compactor:
    def __init__(self, namespaces: dict[str, str]):
        # longest namespace first so nested namespaces pick the tightest prefix
        self.pairs = sorted(namespaces.items(), key=lambda kv: (-len(kv[1]), kv[0]))

    def iri(self, iri: IRI) -> str:
        for prefix, ns in self.pairs:
            if iri.value.startswith(ns):
                local = iri.value[len(ns):]
                if local == "" or _PN_LOCAL.match(local):
                    return f"{prefix}:{local}"
        return f"<{iri.value}>"

    def term(self, term: Term) -> str:
        if isinstance(term, IRI):
            return self.iri(term)
        if isinstance(term, BNode):
            return f"_:{term.label}"
        text = _ttl_string(term.lexical)
        if term.datatype is not None:
            text += "^^" + self.iri(term.datatype)
        return text


def turtle_bytes(graph: TripleGraph) -> bytes:
    compact = _Compactor(graph.namespaces)
    lines = [f"@prefix {p}: <{ns}> ." for p, ns in sorted(graph.namespaces.items())]
    triples = graph.sorted_triples()
    if triples:
        lines.append("")
    rdf_type = RDF.type
    for s, p, o in triples:
        pred = "a" if p == rdf_type else compact.term(p)
        lines.append(f"{compact.term(s)} {pred} {compact.term(o)} .")
    return ("\n".join(lines) + "\n").encode("utf-8")


def serialize_turtle(graph: TripleGraph, sink: IO[bytes]) -> int:
    data = turtle_bytes(graph)
    sink.write(data)
    return len(data)


class _TurtleParser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.graph = TripleGraph()
        self.prefixes: dict[str, str] = {}

    def where(self, pos: int | None = None) -> tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = self.text.count("\n", 0, pos) + 1
        column = pos - (self.text.rfind("\n", 0, pos) + 1) + 1
        return line, column

    def error(self, message: str, pos: int | None = None) -> TurtleSyntaxError:
        return TurtleSyntaxError(message, *self.where(pos))

    def skip_ws(self) -> None:
        text, n = self.text, len(self.text)
        while self.pos < n:
            ch = text[self.pos]
            if ch in " \t\r\n":
                self.pos += 1
            elif ch == "#":
                end = text.find("\n", self.pos)
                self.pos = n if end < 0 else end + 1
            else:
                break

    def peek(self) -> str:
        return self.text[self.pos:self.pos + 1]

    def expect(self, token: str) -> None:
        self.skip_ws()
        if not self.text.startswith(token, self.pos):
            raise self.error(f"expected {token!r}")
        self.pos += len(token)

    def parse(self) -> TripleGraph:
        while True:
            self.skip_ws()
            if self.pos >= len(self.text):
                break
            if self.text.startswith("@prefix", self.pos):
                self.pos += len("@prefix")
                self.prefix_directive(dot=True)
            elif re.match(r"PREFIX\b", self.text[self.pos:self.pos + 7], re.IGNORECASE):
                self.pos += len("PREFIX")
                self.prefix_directive(dot=False)
            else:
                self.statement()
        return self.graph

    def prefix_directive(self, dot: bool) -> None:
        self.skip_ws()
        m = re.compile(r"((?:[A-Za-z][A-Za-z0-9_\-]*)?):").match(self.text, self.pos)
        if not m:
            raise self.error("expected prefix name")
        self.pos = m.end()
        self.skip_ws()
        iri = self.iriref()
        self.prefixes[m.group(1)] = iri.value
        try:
            self.graph.bind(m.group(1), iri.value)
        except RDFError as exc:
            raise self.error(str(exc)) from None
        if dot:
            self.expect(".")

    def statement(self) -> None:
        subject = self.subject()
        while True:
            self.skip_ws()
            predicate = self.predicate()
            while True:
                self.skip_ws()
                obj = self.object()
                self.graph.add(subject, predicate, obj)
                self.skip_ws()
                if self.peek() == ",":
                    self.pos += 1
                    continue
                break
            if self.peek() == ";":
                self.pos += 1
                self.skip_ws()
                if self.peek() == ".":
                    break
                continue
            break
        self.expect(".")

    def subject(self) -> Term:
        ch = self.peek()
        if ch == "<":
            return self.iriref()
        if self.text.startswith("_:", self.pos):
            return self.bnode()
        if ch in ('"', "'"):
            raise self.error("literal cannot be a subject")
        return self.pname()

    def predicate(self) -> IRI:
        if self.peek() == "a":
            nxt = self.text[self.pos + 1:self.pos + 2]
            if nxt == "" or nxt in " \t\r\n<\"'_":
                self.pos += 1
                return RDF.type
        if self.peek() == "<":
            return self.iriref()
        if self.text.startswith("_:", self.pos):
            raise self.error("predicate must be an IRI")
        return self.pname()

    def object(self) -> Term:
        ch = self.peek()
        if ch == "<":
            return self.iriref()
        if self.text.startswith("_:", self.pos):
            return self.bnode()
        if ch in ('"', "'"):
            return self.literal()
        if ch == "":
            raise self.error("unexpected end of input")
        return self.pname()

    def iriref(self) -> IRI:
        start = self.pos
        if self.peek() != "<":
            raise self.error("expected '<'")
        end = self.text.find(">", self.pos + 1)
        newline = self.text.find("\n", self.pos + 1)
        if end < 0 or (0 <= newline < end):
            raise self.error("unterminated IRI", start)
        raw = self.text[self.pos + 1:end]
        raw = re.sub(r"\\u([0-9A-Fa-f]{4})|\\U([0-9A-Fa-f]{8})", lambda m: chr(int(m.group(1) or m.group(2), 16)), raw)
        self.pos = end + 1
        try:
            return IRI(raw)
        except TermError as exc:
            raise self.error(str(exc), start) from None

    def bnode(self) -> BNode:
        m = re.compile(r"_:([A-Za-z_][A-Za-z0-9_\-]*)").match(self.text, self.pos)
        if not m:
            raise self.error("bad blank node label")
        self.pos = m.end()
        return BNode(m.group(1))

    _PNAME = re.compile(r"((?:[A-Za-z][A-Za-z0-9_\-]*)?):((?:[A-Za-z0-9_\-.:]|%[0-9A-Fa-f]{2})*)")

    def pname(self) -> IRI:
        start = self.pos
        m = self._PNAME.match(self.text, self.pos)
        if not m:
            raise self.error("expected an IRI, prefixed name, blank node or literal")
        prefix, local = m.group(1), m.group(2)
        # a trailing '.' terminates the statement rather than belonging to the name
        while local.endswith("."):
            local = local[:-1]
        self.pos = m.start(2) + len(local)
        if prefix not in self.prefixes:
            raise self.error(f"undeclared prefix {prefix!r}", start)
        try:
            return IRI(self.prefixes[prefix] + local)
        except TermError as exc:
            raise self.error(str(exc), start) from None

    _STRING_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}

    def literal(self) -> Literal:
        start = self.pos
        quote = self.peek()
        if self.text.startswith(quote * 3, self.pos):
            raise self.error("long string literals are not supported")
        self.pos += 1
        out = []
        text = self.text
        while True:
            if self.pos >= len(text) or text[self.pos] in "\r\n":
                raise self.error("unterminated string literal", start)
            ch = text[self.pos]
            if ch == quote:
                self.pos += 1
                break
            if ch == "\\":
                esc = text[self.pos + 1:self.pos + 2]
                if esc in self._STRING_ESCAPES:
                    out.append(self._STRING_ESCAPES[esc])
                    self.pos += 2
                elif esc in ("u", "U"):
                    width = 4 if esc == "u" else 8
                    digits = text[self.pos + 2:self.pos + 2 + width]
                    if not re.fullmatch(r"[0-9A-Fa-f]{%d}" % width, digits):
                        raise self.error("bad unicode escape")
                    out.append(chr(int(digits, 16)))
                    self.pos += 2 + width
                else:
                    raise self.error(f"bad escape sequence \\{esc}")
                continue
            out.append(ch)
            self.pos += 1
        datatype = None
        if self.text.startswith("^^", self.pos):
            self.pos += 2
            datatype = self.iriref() if self.peek() == "<" else self.pname()
        elif self.peek() == "@":
            raise self.error("language-tagged literals are not supported")
        return Literal("".join(out), datatype)


def parse_turtle(source: str | bytes | IO) -> TripleGraph:
    """Parse Turtle text in the subset this module writes."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    return _TurtleParser(source).parse()


# -- RDF/XML -----------------------------------------------------------------

def _is_name_start(ch: str) -> bool:
    return ch == "_" or ch.isalpha()


def _is_name_char(ch: str) -> bool:
    return ch in "_-." or ch.isalnum()


def split_iri(iri: IRI) -> tuple[str, str]:
    """Split into (namespace, local name) where the local name is an XML NCName."""
    value = iri.value
    i = len(value)
    while i > 0 and _is_name_char(value[i - 1]):
        i -= 1
    while i < len(value) and not _is_name_start(value[i]):
        i += 1
    if i >= len(value):
        raise UnsplittableIRIError(f"cannot split {value!r} into namespace and local name")
    return value[:i], value[i:]


def _xml_text(text: str) -> str:
    for ch in text:
        code = ord(ch)
        if (code < 0x20 and ch not in "\t\n\r") or 0xD800 <= code <= 0xDFFF or code in (0xFFFE, 0xFFFF):
            raise RDFError(f"character U+{code:04X} cannot appear in XML 1.0")
    return xml_escape(text, {"\r": "&#13;"})


def _xml_attr(text: str) -> str:
    return '"' + _xml_text(text).replace('"', "&quot;").replace("\n", "&#10;").replace("\t", "&#9;") + '"'


def rdfxml_bytes(graph: TripleGraph) -> bytes:
    triples = graph.sorted_triples()
    by_ns = {ns: p for p, ns in sorted(graph.namespaces.items()) if p}
    decls = {p: ns for p, ns in graph.namespaces.items() if p}
    qnames: dict[IRI, str] = {}
    unknown: set[str] = set()
    splits = {}
    for _, p, _ in triples:
        if p not in splits:
            splits[p] = split_iri(p)
            if splits[p][0] not in by_ns:
                unknown.add(splits[p][0])
    n = 1
    for ns in sorted(unknown):
        while f"ns{n}" in decls:
            n += 1
        decls[f"ns{n}"] = ns
        by_ns[ns] = f"ns{n}"
    for p, (ns, local) in splits.items():
        qnames[p] = f"{by_ns[ns]}:{local}"

    out = ['<?xml version="1.0" encoding="utf-8"?>', "<rdf:RDF"]
    out.extend(f"  xmlns:{p}={_xml_attr(ns)}" for p, ns in sorted(decls.items()))
    out[-1] += ">"
    current = None
    for s, p, o in triples:
        if s != current:
            if current is not None:
                out.append("  </rdf:Description>")
            attr = f"rdf:about={_xml_attr(s.value)}" if isinstance(s, IRI) else f'rdf:nodeID="{s.label}"'
            out.append(f"  <rdf:Description {attr}>")
            current = s
        name = qnames[p]
        if isinstance(o, IRI):
            out.append(f"    <{name} rdf:resource={_xml_attr(o.value)}/>")
        elif isinstance(o, BNode):
            out.append(f'    <{name} rdf:nodeID="{o.label}"/>')
        else:
            dt = f" rdf:datatype={_xml_attr(o.datatype.value)}" if o.datatype else ""
            out.append(f"    <{name}{dt}>{_xml_text(o.lexical)}</{name}>")
    if current is not None:
        out.append("  </rdf:Description>")
    out.append("</rdf:RDF>")
    return ("\n".join(out) + "\n").encode("utf-8")


def serialize_rdfxml(graph: TripleGraph, sink: IO[bytes]) -> int:
    data = rdfxml_bytes(graph)
    sink.write(data)
    return len(data)


def serialize(graph: TripleGraph, fmt: str = "turtle") -> bytes:
    buf = io.BytesIO()
    if fmt in ("turtle", "ttl"):
        serialize_turtle(graph, buf)
    elif fmt in ("xml", "rdfxml", "owl"):
        serialize_rdfxml(graph, buf)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return buf.getvalue()
