"""Sensor-fault knowledge graph: an in-memory triple store with Turtle I/O.

The ontology has a single class, ``SensorFault``, with three datatype
properties: ``name`` (ground-truth class label), ``fault_desc`` (textual
signal description) and ``severity`` (opaque auxiliary value).
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass
from typing import Iterable, Iterator

__all__ = [
    "IRI",
    "Literal",
    "Var",
    "Triple",
    "SensorFault",
    "Graph",
    "TurtleParseError",
    "SFO",
    "RDF_TYPE",
    "XSD",
    "add_fault",
    "query",
    "all_fault_descriptions",
    "to_turtle",
    "from_turtle",
    "QualityFlags",
    "DiscoveryOutcome",
]

SFO = "http://example.org/sensor-fault-ontology#"
RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
XSD = "http://www.w3.org/2001/XMLSchema#"
RDF_TYPE = RDF + "type"

PREFIXES = {"rdf": RDF, "sfo": SFO, "xsd": XSD}


@dataclass(frozen=True, order=True)
class IRI:
    value: str

    def __str__(self):
        return f"<{self.value}>"


@dataclass(frozen=True, order=True)
class Literal:
    lexical: str
    datatype: str = XSD + "string"
    lang: str | None = None

    def __post_init__(self):
        if self.lang is not None:
            object.__setattr__(self, "lang", self.lang.lower())
            object.__setattr__(self, "datatype", RDF + "langString")

    def to_python(self):
        if self.datatype == XSD + "integer":
            return int(self.lexical)
        if self.datatype in (XSD + "decimal", XSD + "double"):
            return float(self.lexical)
        if self.datatype == XSD + "boolean":
            return self.lexical == "true"
        return self.lexical

    @classmethod
    def of(cls, value) -> "Literal":
        if isinstance(value, bool):
            return cls("true" if value else "false", XSD + "boolean")
        if isinstance(value, int):
            return cls(str(value), XSD + "integer")
        if isinstance(value, float):
            return cls(repr(value), XSD + "double")
        return cls(str(value))


@dataclass(frozen=True)
class Var:
    name: str


Term = IRI | Literal
Triple = tuple[IRI, IRI, Term]


def _sort_key(term):
    # IRIs before literals, then lexical order
    if isinstance(term, IRI):
        return (0, term.value, "", "")
    return (1, term.lexical, term.datatype, term.lang or "")


def _triple_key(t):
    return tuple(_sort_key(x) for x in t)


@dataclass(frozen=True)
class SensorFault:
    id: str
    name: str
    fault_desc: str
    severity: object = "unknown"

    def __post_init__(self):
        if not self.name:
            raise ValueError("fault name must not be empty")
        if not self.fault_desc:
            raise ValueError("fault description must not be empty")
        if not re.fullmatch(r"[A-Za-z0-9_.\-]+", self.id):
            raise ValueError(f"fault id {self.id!r} must be a simple token")

    @property
    def iri(self) -> IRI:
        return IRI(SFO + "fault_" + self.id)


class Graph:
    """Set of triples guarded by a single-writer, multi-reader lock."""

    def __init__(self, triples: Iterable[Triple] = ()):
        self._triples: set[Triple] = set()
        self._lock = threading.RLock()
        for t in triples:
            self.add(t)

    def add(self, triple: Triple) -> None:
        s, p, o = triple
        if not isinstance(s, IRI) or not isinstance(p, IRI):
            raise TypeError("subject and predicate must be IRIs")
        if not isinstance(o, (IRI, Literal)):
            raise TypeError("object must be an IRI or a Literal")
        with self._lock:
            self._triples.add((s, p, o))

    def __len__(self) -> int:
        return len(self._triples)

    def __iter__(self) -> Iterator[Triple]:
        with self._lock:
            snapshot = sorted(self._triples, key=_triple_key)
        return iter(snapshot)

    def __contains__(self, triple) -> bool:
        return triple in self._triples

    def __eq__(self, other) -> bool:
        return isinstance(other, Graph) and self._triples == other._triples

    def triples(self) -> set[Triple]:
        with self._lock:
            return set(self._triples)

    def match(self, s=None, p=None, o=None) -> list[Triple]:
        """Triples matching a pattern; ``None`` or a :class:`Var` is a wildcard."""
        def ok(want, have):
            return want is None or isinstance(want, Var) or want == have

        with self._lock:
            found = [t for t in self._triples if ok(s, t[0]) and ok(p, t[1]) and ok(o, t[2])]
        return sorted(found, key=_triple_key)


@dataclass
class QualityFlags:
    silhouette: float | None = None
    dtw_frac: float | None = None


@dataclass
class DiscoveryOutcome:
    kind: str  # "knowledge", "pattern" or "none"
    fault: str | None = None
    flags: QualityFlags | None = None

    def __post_init__(self):
        if self.kind not in ("knowledge", "pattern", "none"):
            raise ValueError(f"unknown discovery outcome {self.kind!r}")
        if (self.kind == "knowledge") != (self.fault is not None):
            raise ValueError("only a knowledge discovery carries a matched fault")


def add_fault(graph: Graph, fault: SensorFault) -> Graph:
    name_pred = IRI(SFO + "name")
    for existing in graph.match(None, name_pred, None):
        if existing[2].lexical == fault.name:
            raise ValueError(f"a fault named {fault.name!r} already exists")
    if graph.match(fault.iri, None, None):
        raise ValueError(f"a fault with id {fault.id!r} already exists")
    graph.add((fault.iri, IRI(RDF_TYPE), IRI(SFO + "SensorFault")))
    graph.add((fault.iri, name_pred, Literal(fault.name)))
    graph.add((fault.iri, IRI(SFO + "fault_desc"), Literal(fault.fault_desc)))
    graph.add((fault.iri, IRI(SFO + "severity"), Literal.of(fault.severity)))
    return graph


def query(graph: Graph, *patterns) -> list[dict[str, Term]]:
    """Basic graph pattern matching.

    Each pattern is an ``(s, p, o)`` tuple whose positions are terms,
    :class:`Var` instances, or strings starting with ``?``. Returns one
    binding dict per solution, ordered by the bound values. A fully ground
    pattern that is present yields a single empty binding.
    """
    def norm(x):
        if isinstance(x, str) and x.startswith("?"):
            return Var(x[1:])
        return x

    solutions: list[dict[str, Term]] = [{}]
    for pattern in patterns:
        pattern = tuple(norm(x) for x in pattern)
        nxt = []
        for binding in solutions:
            bound = [binding.get(x.name, x) if isinstance(x, Var) else x for x in pattern]
            for triple in graph.match(*bound):
                new = dict(binding)
                consistent = True
                for slot, value in zip(bound, triple):
                    if isinstance(slot, Var):
                        if new.setdefault(slot.name, value) != value:
                            consistent = False
                if consistent:
                    nxt.append(new)
        solutions = nxt
    names = sorted({k for b in solutions for k in b})
    solutions.sort(key=lambda b: tuple(_sort_key(b[k]) for k in names))
    return solutions


def all_fault_descriptions(graph: Graph) -> list[tuple[str, str, object]]:
    """``(name, fault_desc, severity)`` for every fault, sorted by name."""
    rows = query(
        graph,
        ("?f", IRI(RDF_TYPE), IRI(SFO + "SensorFault")),
        ("?f", IRI(SFO + "name"), "?name"),
        ("?f", IRI(SFO + "fault_desc"), "?desc"),
        ("?f", IRI(SFO + "severity"), "?sev"),
    )
    out = [(b["name"].lexical, b["desc"].lexical, b["sev"].to_python()) for b in rows]
    return sorted(out, key=lambda r: r[0])


# --- Turtle serialization -------------------------------------------------

_PN_LOCAL = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")
_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t",
            "\b": "\\b", "\f": "\\f"}


def _escape_string(s: str) -> str:
    out = []
    for ch in s:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04X}")
        else:
            out.append(ch)
    return "".join(out)


def _escape_iri(s: str) -> str:
    out = []
    for ch in s:
        if ord(ch) <= 0x20 or ch in '<>"{}|^`\\':
            out.append(f"\\u{ord(ch):04X}" if ord(ch) <= 0xFFFF else f"\\U{ord(ch):08X}")
        else:
            out.append(ch)
    return "".join(out)


def _write_iri(value: str) -> str:
    for prefix, ns in PREFIXES.items():
        if value.startswith(ns) and _PN_LOCAL.fullmatch(value[len(ns):]):
            return f"{prefix}:{value[len(ns):]}"
    return f"<{_escape_iri(value)}>"


def _write_term(term, predicate: bool = False) -> str:
    if isinstance(term, IRI):
        if predicate and term.value == RDF_TYPE:
            return "a"
        return _write_iri(term.value)
    text = f'"{_escape_string(term.lexical)}"'
    if term.lang:
        return f"{text}@{term.lang}"
    if term.datatype == XSD + "string":
        return text
    return f"{text}^^{_write_iri(term.datatype)}"


def to_turtle(graph: Graph) -> str:
    """Deterministic Turtle: prefixes, then triples sorted and grouped by subject."""
    lines = [f"@prefix {p}: <{ns}> ." for p, ns in sorted(PREFIXES.items())]
    lines.append("")
    current = None
    block: list[str] = []

    def flush():
        if block:
            lines.append(" ;\n    ".join(block) + " .")
            block.clear()

    for s, p, o in graph:
        if s != current:
            flush()
            current = s
            block.append(f"{_write_term(s)} {_write_term(p, True)} {_write_term(o)}")
        else:
            block.append(f"{_write_term(p, True)} {_write_term(o)}")
    flush()
    return "\n".join(lines) + "\n"


class TurtleParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<iri><[^<>"{}|^`\\\x00-\x20]*(?:\\[uU][0-9A-Fa-f]+[^<>"{}|^`\\\x00-\x20]*)*>)
  | (?P<long>\"\"\"(?:[^"\\]|\\.|"(?!""))*\"\"\"|'''(?:[^'\\]|\\.|'(?!''))*''')
  | (?P<str>"(?:[^"\\\n\r]|\\.)*"|'(?:[^'\\\n\r]|\\.)*')
  | (?P<directive>@prefix|@base)
  | (?P<lang>@[A-Za-z]+(?:-[A-Za-z0-9]+)*)
  | (?P<dtype>\^\^)
  | (?P<number>[+-]?(?:\d*\.\d+(?:[eE][+-]?\d+)?|\d+\.?[eE][+-]?\d+|\d+))
  | (?P<pname>(?:[A-Za-z][A-Za-z0-9_\-.]*)?:(?:[A-Za-z0-9_\-]|%[0-9A-Fa-f]{2})*)
  | (?P<keyword>PREFIX\b|BASE\b|a\b|true\b|false\b)
  | (?P<punct>[.;,\[\]()])
    """,
    re.VERBOSE,
)

_UNESCAPE = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f",
             '"': '"', "'": "'", "\\": "\\"}


def _unescape(body: str, line: int, col: int, iri: bool = False) -> str:
    out, i = [], 0
    while i < len(body):
        ch = body[i]
        if ch != "\\":
            out.append(ch)
            i += 1
            continue
        if i + 1 >= len(body):
            raise TurtleParseError("dangling escape", line, col)
        code = body[i + 1]
        if code in "uU":
            width = 4 if code == "u" else 8
            digits = body[i + 2:i + 2 + width]
            if len(digits) != width or not re.fullmatch(r"[0-9A-Fa-f]+", digits):
                raise TurtleParseError("malformed unicode escape", line, col)
            out.append(chr(int(digits, 16)))
            i += 2 + width
        elif code in _UNESCAPE and not iri:
            out.append(_UNESCAPE[code])
            i += 2
        else:
            raise TurtleParseError(f"invalid escape \\{code}", line, col)
    return "".join(out)


def _tokenize(text: str):
    pos, line, line_start = 0, 1, 0
    tokens = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise TurtleParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        value = m.group()
        if kind != "ws":
            tokens.append((kind, value, line, col))
        newlines = value.count("\n")
        if newlines:
            line += newlines
            line_start = pos + value.rindex("\n") + 1
        pos = m.end()
    tokens.append(("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0
        self.prefixes: dict[str, str] = {}
        self.graph = Graph()

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise TurtleParseError(message, tok[2], tok[3])

    def expect(self, kind, value=None):
        tok = self.next()
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            self.fail(f"expected {want!r}, found {tok[1] or 'end of input'!r}", tok)
        return tok

    def parse(self) -> Graph:
        while self.peek()[0] != "eof":
            tok = self.peek()
            if tok[0] == "directive" or (tok[0] == "keyword" and tok[1] in ("PREFIX", "BASE")):
                self.directive()
            else:
                self.statement()
        return self.graph

    def directive(self):
        tok = self.next()
        if tok[1] in ("@base", "BASE"):
            self.fail("@base is not supported", tok)
        name = self.expect("pname")
        if not name[1].endswith(":"):
            self.fail("prefix declaration needs a name ending in ':'", name)
        iri = self.expect("iri")
        self.prefixes[name[1][:-1]] = _unescape(iri[1][1:-1], iri[2], iri[3], iri=True)
        if tok[1] == "@prefix":
            self.expect("punct", ".")

    def iri(self, tok) -> IRI:
        kind, value, line, col = tok
        if kind == "iri":
            return IRI(_unescape(value[1:-1], line, col, iri=True))
        if kind == "pname":
            prefix, _, local = value.partition(":")
            if prefix not in self.prefixes:
                self.fail(f"undeclared prefix {prefix!r}", tok)
            return IRI(self.prefixes[prefix] + local)
        self.fail(f"expected an IRI, found {value or 'end of input'!r}", tok)

    def statement(self):
        subject = self.iri(self.next())
        self.predicate_object_list(subject)
        self.expect("punct", ".")

    def predicate_object_list(self, subject):
        while True:
            tok = self.next()
            if tok[0] == "keyword" and tok[1] == "a":
                predicate = IRI(RDF_TYPE)
            else:
                predicate = self.iri(tok)
            while True:
                self.graph.add((subject, predicate, self.obj()))
                if self.peek()[:2] == ("punct", ","):
                    self.next()
                    continue
                break
            if self.peek()[:2] == ("punct", ";"):
                while self.peek()[:2] == ("punct", ";"):
                    self.next()
                if self.peek()[:2] == ("punct", "."):
                    return
                continue
            return

    def obj(self):
        tok = self.next()
        kind, value, line, col = tok
        if kind in ("iri", "pname"):
            return self.iri(tok)
        if kind in ("str", "long"):
            q = 3 if kind == "long" else 1
            lexical = _unescape(value[q:-q], line, col)
            nxt = self.peek()
            if nxt[0] == "lang":
                self.next()
                return Literal(lexical, lang=nxt[1][1:])
            if nxt[0] == "dtype":
                self.next()
                return Literal(lexical, self.iri(self.next()).value)
            return Literal(lexical)
        if kind == "number":
            if re.fullmatch(r"[+-]?\d+", value):
                return Literal(value, XSD + "integer")
            if "e" in value.lower():
                return Literal(value, XSD + "double")
            return Literal(value, XSD + "decimal")
        if kind == "keyword" and value in ("true", "false"):
            return Literal(value, XSD + "boolean")
        if kind == "punct" and value in "[(":
            self.fail("blank nodes and collections are not supported", tok)
        self.fail(f"expected an object, found {value or 'end of input'!r}", tok)


def from_turtle(text: str) -> Graph:
    """Parse the Turtle subset produced by :func:`to_turtle` (and common variants)."""
    return _Parser(text).parse()
