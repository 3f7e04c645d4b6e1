"""Reading fetched RDF documents and writing N-Quads dumps.

Supported inputs are N-Triples and a Turtle subset (prefix/base directives,
``;`` and ``,`` abbreviations, ``a``, blank node labels and ``[ ... ]``
property lists; no collections).  ``text/n3`` bodies go through the Turtle
subset.
"""
from __future__ import annotations

import itertools
import logging
import re
import threading
import uuid
from dataclasses import dataclass, field
from urllib.parse import urljoin

from .terms import (
    BlankLabel, Quad, Str, TermError, Triple, UnknownDatatype, Uri,
    is_absolute_iri, nt_term, numeric_literal, typed_literal, unescape,
)

log = logging.getLogger(__name__)

SUPPORTED_CONTENT_TYPES = ("text/turtle", "application/n-triples", "text/n3")


class RdfSyntaxError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{line}:{col}: {message}" if line else message)
        self.message = message
        self.line = line
        self.col = col


class UnsupportedContentType(ValueError):
    pass


@dataclass
class SkippedTriple:
    line: int
    reason: str


@dataclass
class RdfDocument:
    triples: list = field(default_factory=list)
    skipped: list = field(default_factory=list)


_TOKEN_SPEC = [
    ("IRIREF", r'<[^<>"{}|^`\\\x00-\x20]*>'),
    ("LSTRING", r'"""(?:[^"\\]|\\.|"(?!""))*"""|' r"'''(?:[^'\\]|\\.|'(?!''))*'''"),
    ("STRING", r'"(?:[^"\\\n\r]|\\.)*"|' r"'(?:[^'\\\n\r]|\\.)*'"),
    ("DIRECTIVE", r"@(?:prefix|base)\b"),
    ("LANGTAG", r"@[A-Za-z]+(?:-[A-Za-z0-9]+)*"),
    ("DTYPE", r"\^\^"),
    ("BLANK", r"_:[A-Za-z0-9_](?:[\w.-]*[\w-])?"),
    ("NUMBER", r"[+-]?(?:\d+\.\d*[eE][+-]?\d+|\.\d+[eE][+-]?\d+|\d+[eE][+-]?\d+|\d*\.\d+|\d+)"),
    ("PNAME", r"(?:[A-Za-z](?:[\w.-]*[\w-])?)?:(?:[\w:%-](?:[\w.:%-]*[\w:%-])?)?"),
    ("NAME", r"[A-Za-z]+"),
    ("PUNCT", r"[.;,\[\]()]"),
    ("WS", r"[ \t\r\n]+|#[^\n]*"),
]
_MASTER = re.compile("|".join(f"(?P<{n}>{p})" for n, p in _TOKEN_SPEC))


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _MASTER.match(text, pos)
        if not m:
            raise RdfSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        tok_text = m.group()
        if kind != "WS":
            toks.append(_Tok(kind, tok_text, line, pos - line_start + 1))
        nl = tok_text.count("\n")
        if nl:
            line += nl
            line_start = pos + tok_text.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("EOF", "", line, pos - line_start + 1))
    return toks


class _Bad:
    """Placeholder object for a literal that cannot be typed."""

    def __init__(self, reason):
        self.reason = reason


class _TurtleParser:
    def __init__(self, text: str, base: str | None, ntriples: bool = False, quads: bool = False):
        self.toks = _tokenize(text)
        self.i = 0
        self.base = base
        self.prefixes: dict[str, str] = {}
        self.ntriples = ntriples
        self.quads = quads
        self.doc = RdfDocument()
        self._anon = itertools.count(1)

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return RdfSyntaxError(msg, tok.line, tok.col)

    def expect(self, text):
        if self.tok.text != text or self.tok.kind not in ("PUNCT",):
            raise self.error(f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        return self.next()

    # grammar
    def parse(self) -> RdfDocument:
        while self.tok.kind != "EOF":
            if self.quads:
                self.statement_quad()
            elif self.tok.kind == "DIRECTIVE" and not self.ntriples:
                self.directive()
            elif self.tok.kind == "NAME" and self.tok.text.upper() in ("PREFIX", "BASE") \
                    and not self.ntriples:
                self.sparql_directive()
            else:
                self.triples()
        return self.doc

    def directive(self):
        kw = self.next().text
        if kw == "@prefix":
            self._prefix_decl()
        else:
            self.base = self._iri(self.next())
        self.expect(".")

    def sparql_directive(self):
        kw = self.next().text.upper()
        if kw == "PREFIX":
            self._prefix_decl()
        else:
            self.base = self._iri(self.next())

    def _prefix_decl(self):
        t = self.next()
        if t.kind != "PNAME" or not t.text.endswith(":") or t.text.count(":") != 1:
            raise self.error("expected prefix name", t)
        iri_tok = self.next()
        if iri_tok.kind != "IRIREF":
            raise self.error("expected IRI", iri_tok)
        self.prefixes[t.text[:-1]] = self._iri(iri_tok)

    def triples(self):
        subj_tok = self.tok
        if self.tok.text == "[" and not self.ntriples:
            subject = self.blank_property_list()
            if self.tok.text == ".":
                self.next()
                return
        else:
            subject = self.subject()
        self.predicate_object_list(subject, subj_tok.line)
        self.expect(".")

    def statement_quad(self):
        line = self.tok.line
        s = self.subject()
        p = self.predicate()
        o = self.object()
        g = None
        if self.tok.text != ".":
            t = self.next()
            if t.kind != "IRIREF":
                raise self.error("graph name must be an IRI", t)
            g = Uri(self._iri(t))
        self.expect(".")
        if isinstance(o, _Bad):
            raise RdfSyntaxError(o.reason, line)
        self.doc.triples.append(Quad(g, Triple(s, p, o)) if g else Triple(s, p, o))

    def predicate_object_list(self, subject, line):
        while True:
            pred = self.predicate()
            while True:
                obj = self.object()
                self._emit(subject, pred, obj, line)
                if self.tok.text == "," and self.tok.kind == "PUNCT" and not self.ntriples:
                    self.next()
                    continue
                break
            if self.tok.text == ";" and self.tok.kind == "PUNCT" and not self.ntriples:
                while self.tok.text == ";":
                    self.next()
                if self.tok.text in (".", "]"):
                    return
                continue
            return

    def _emit(self, s, p, o, line):
        if isinstance(o, _Bad):
            self.doc.skipped.append(SkippedTriple(line, o.reason))
            return
        self.doc.triples.append(Triple(s, p, o))

    def subject(self):
        t = self.next()
        if t.kind == "BLANK":
            return BlankLabel(t.text[2:])
        if t.kind == "PUNCT" and t.text == "(":
            raise self.error("collections are not supported", t)
        return self._resource(t)

    def predicate(self):
        t = self.next()
        if t.kind == "NAME" and t.text == "a" and not self.ntriples:
            return Uri("http://www.w3.org/1999/02/22-rdf-syntax-ns#type")
        return self._resource(t)

    def object(self):
        t = self.tok
        if t.kind == "BLANK":
            self.next()
            return BlankLabel(t.text[2:])
        if t.kind in ("STRING", "LSTRING"):
            return self.literal()
        if t.kind == "NUMBER" and not self.ntriples:
            self.next()
            try:
                return numeric_literal(t.text)
            except TermError as exc:
                return _Bad(str(exc))
        if t.kind == "NAME" and t.text in ("true", "false") and not self.ntriples:
            self.next()
            return _Bad("unsupported literal datatype xsd:boolean")
        if t.kind == "PUNCT" and t.text == "[" and not self.ntriples:
            return self.blank_property_list()
        if t.kind == "PUNCT" and t.text == "(":
            raise self.error("collections are not supported", t)
        self.next()
        return self._resource(t)

    def blank_property_list(self):
        open_tok = self.next()
        node = BlankLabel(f"anon{next(self._anon)}")
        if self.tok.text == "]":
            self.next()
            return node
        self.predicate_object_list(node, open_tok.line)
        if self.tok.text != "]":
            raise self.error("expected ']'")
        self.next()
        return node

    def literal(self):
        t = self.next()
        raw = t.text[3:-3] if t.kind == "LSTRING" else t.text[1:-1]
        try:
            text = unescape(raw)
        except (TermError, ValueError) as exc:
            raise self.error(str(exc), t) from None
        if self.tok.kind == "LANGTAG":
            lang = self.next().text[1:]
            return Str(text, lang)
        if self.tok.kind == "DTYPE":
            self.next()
            dt_tok = self.next()
            dt = self._resource(dt_tok).value
            try:
                return typed_literal(text, dt)
            except UnknownDatatype as exc:
                return _Bad(str(exc))
            except TermError as exc:
                return _Bad(str(exc))
        return Str(text)

    def _resource(self, t: _Tok) -> Uri:
        if t.kind == "IRIREF":
            return Uri(self._iri(t))
        if t.kind == "PNAME" and not self.ntriples:
            prefix, _, local = t.text.partition(":")
            if prefix not in self.prefixes:
                raise self.error(f"undeclared prefix {prefix!r}", t)
            try:
                return Uri(self.prefixes[prefix] + local)
            except TermError as exc:
                raise self.error(str(exc), t) from None
        if t.kind == "EOF":
            raise self.error("truncated statement", t)
        raise self.error(f"unexpected {t.text!r}", t)

    def _iri(self, t: _Tok) -> str:
        if t.kind != "IRIREF":
            raise self.error("expected IRI", t)
        try:
            value = unescape(t.text[1:-1])
        except (TermError, ValueError) as exc:
            raise self.error(str(exc), t) from None
        if not is_absolute_iri(value):
            if self.base is None or self.ntriples:
                raise self.error(f"relative IRI {value!r} without base", t)
            value = urljoin(self.base, value)
            if not is_absolute_iri(value):
                raise self.error(f"malformed IRI {value!r}", t)
        return value


def media_type(content_type: str) -> str:
    return content_type.split(";", 1)[0].strip().lower()


def parse_rdf_document(body: bytes, content_type: str, base: str | None = None) -> RdfDocument:
    mt = media_type(content_type)
    if mt not in SUPPORTED_CONTENT_TYPES:
        raise UnsupportedContentType(f"unsupported content type {content_type!r}")
    try:
        text = body.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise RdfSyntaxError(f"body is not UTF-8: {exc}") from None
    parser = _TurtleParser(text, base, ntriples=(mt == "application/n-triples"))
    doc = parser.parse()
    for skip in doc.skipped:
        log.warning("skipped triple at line %d: %s", skip.line, skip.reason)
    return doc


def parse_rdf(body: bytes, content_type: str, base: str | None = None) -> list[Triple]:
    """Parse a fetched document into triples, blank nodes kept as labels.

    Triples whose literal cannot be mapped to a supported datatype are
    skipped with a warning; syntax errors abort with a position.
    """
    return parse_rdf_document(body, content_type, base).triples


def parse_nquads(body: bytes | str) -> set[Quad]:
    """Parse a ground N-Quads dump. Statements without a graph are rejected."""
    text = body.decode("utf-8") if isinstance(body, bytes) else body
    parser = _TurtleParser(text, None, ntriples=True, quads=True)
    quads = set()
    for q in parser.parse().triples:
        if not isinstance(q, Quad):
            raise RdfSyntaxError("statement without graph name in N-Quads dump")
        if not q.is_ground():
            raise RdfSyntaxError("blank node in N-Quads dump")
        quads.add(q)
    return quads


class SkolemMinter:
    """Issues ``urn:skolem:<run-id>:<n>`` URIs, never repeating within a run."""

    def __init__(self, run_id: str | None = None):
        self.run_id = run_id or uuid.uuid4().hex[:12]
        self._counter = itertools.count(1)
        self._lock = threading.Lock()

    def __call__(self) -> Uri:
        with self._lock:
            n = next(self._counter)
        return Uri(f"urn:skolem:{self.run_id}:{n}")


def skolemize(triples, mint) -> list[Triple]:
    """Replace blank labels of ONE document by fresh URIs.

    Each call is one document scope: the same label maps to the same URI
    within the call, and two calls never share URIs.
    """
    mapping: dict[BlankLabel, Uri] = {}

    def fix(t):
        if isinstance(t, BlankLabel):
            if t not in mapping:
                mapping[t] = mint()
            return mapping[t]
        return t

    return [Triple(fix(tr.subject), fix(tr.predicate), fix(tr.object)) for tr in triples]


def quad_sort_key(q: Quad) -> tuple:
    return (nt_term(q.graph), nt_term(q.subject), nt_term(q.predicate), nt_term(q.object))


def serialize_nquads(quads) -> bytes:
    quads = list(quads)
    for q in quads:
        if not q.is_ground():
            raise ValueError(f"cannot serialise non-ground quad {q}")
    lines = []
    for q in sorted(quads, key=quad_sort_key):
        g, s, p, o = quad_sort_key(q)
        lines.append(f"{s} {p} {o} {g} .\n")
    return "".join(lines).encode("utf-8")


__all__ = [
    "RdfDocument", "RdfSyntaxError", "SkolemMinter", "SkippedTriple",
    "SUPPORTED_CONTENT_TYPES", "UnsupportedContentType", "media_type",
    "parse_nquads", "parse_rdf", "parse_rdf_document", "serialize_nquads",
    "skolemize",
]
