"""RDF terms, triples and quads.

Terms are immutable values.  ``Int`` and ``Dec`` are distinct constructors
even when numerically equal; value equality across the two is a filter
concern (see :mod:`ldscript.evaluate`), not a term identity concern.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from decimal import Decimal, InvalidOperation
from typing import Mapping, Union

XSD = "http://www.w3.org/2001/XMLSchema#"
RDF = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
OWL = "http://www.w3.org/2002/07/owl#"

XSD_STRING = XSD + "string"
XSD_INTEGER = XSD + "integer"
XSD_DECIMAL = XSD + "decimal"
XSD_FLOAT = XSD + "float"
XSD_DOUBLE = XSD + "double"
XSD_DATETIME = XSD + "dateTime"
XSD_ANYURI = XSD + "anyURI"
RDF_LANGSTRING = RDF + "langString"

# predeclared in scripts
DEFAULT_PREFIXES = {"rdf": RDF, "rdfs": RDFS, "xsd": XSD, "owl": OWL}

_SCHEME = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:")
_BAD_IRI_CHARS = re.compile(r'[\x00-\x20<>"{}|^`\\]')
_LANGTAG = re.compile(r"^[A-Za-z]{1,8}(-[A-Za-z0-9]{1,8})*$")
_DATETIME = re.compile(
    r"^(-?\d{4,})-(\d{1,2})-(\d{1,2})T(\d{2}):(\d{2}):(\d{2})(\.\d+)?"
    r"(Z|[+-]\d{2}:\d{2})$"
)
_INTEGER = re.compile(r"^[+-]?\d+$")
_DECIMAL = re.compile(r"^[+-]?(\d+\.\d*|\.\d+)$")
_DOUBLE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)[eE][+-]?\d+$")


class TermError(ValueError):
    """Raised for malformed IRIs, literals or prefixed names."""


def is_absolute_iri(value: str) -> bool:
    return bool(_SCHEME.match(value)) and not _BAD_IRI_CHARS.search(value)


@dataclass(frozen=True)
class Uri:
    value: str

    def __post_init__(self):
        if not is_absolute_iri(self.value):
            raise TermError(f"not an absolute IRI: {self.value!r}")

    def __str__(self):
        return f"<{self.value}>"


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name or self.name.startswith("$"):
            raise TermError(f"bad variable name: {self.name!r}")

    def __str__(self):
        return f"${self.name}"


@dataclass(frozen=True)
class Str:
    value: str
    lang: str | None = None

    def __post_init__(self):
        if self.lang is not None:
            if not _LANGTAG.match(self.lang):
                raise TermError(f"malformed language tag: {self.lang!r}")
            # tags compare case-insensitively; store the lowercase form
            object.__setattr__(self, "lang", self.lang.lower())

    def __str__(self):
        s = quote_string(self.value)
        return f"{s}@{self.lang}" if self.lang else s


@dataclass(frozen=True)
class Int:
    value: int

    def __post_init__(self):
        if isinstance(self.value, bool) or not isinstance(self.value, int):
            raise TermError(f"Int needs an int, got {self.value!r}")

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class Dec:
    value: Decimal

    def __post_init__(self):
        v = self.value
        if isinstance(v, (int, str)):
            v = Decimal(v)
        if not isinstance(v, Decimal) or not v.is_finite():
            raise TermError(f"Dec needs a finite Decimal, got {self.value!r}")
        object.__setattr__(self, "value", v)

    def __str__(self):
        return canonical_decimal(self.value)


@dataclass(frozen=True)
class DateTime:
    value: datetime

    def __post_init__(self):
        if self.value.tzinfo is None or self.value.utcoffset() is None:
            raise TermError("dateTime must carry a timezone")

    def __str__(self):
        return canonical_datetime(self.value)


Term = Union[Uri, Var, Str, Int, Dec, DateTime]
Literal = (Str, Int, Dec, DateTime)


@dataclass(frozen=True)
class BlankLabel:
    """Document-local blank node; never stored."""

    label: str

    def __str__(self):
        return f"_:{self.label}"


@dataclass(frozen=True)
class Triple:
    subject: Term
    predicate: Term
    object: Term

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    def __str__(self):
        return f"{self.subject} {self.predicate} {self.object}"


@dataclass(frozen=True)
class Quad:
    graph: Term
    triple: Triple

    @property
    def subject(self):
        return self.triple.subject

    @property
    def predicate(self):
        return self.triple.predicate

    @property
    def object(self):
        return self.triple.object

    def terms(self):
        return (self.graph, *self.triple)

    def is_ground(self) -> bool:
        return isinstance(self.graph, Uri) and not any(
            isinstance(t, (Var, BlankLabel)) for t in self.triple
        )


def canonical_decimal(d: Decimal) -> str:
    """xsd:decimal canonical form: no exponent, at least one fractional digit."""
    text = format(d, "f")
    if "." not in text:
        text += ".0"
    else:
        text = text.rstrip("0")
        if text.endswith("."):
            text += "0"
    if text.startswith("-") and Decimal(text) == 0:
        text = text[1:]
    return text


def canonical_datetime(dt: datetime) -> str:
    offset = dt.utcoffset()
    base = dt.replace(tzinfo=None).isoformat()
    if offset == timedelta(0):
        return base + "Z"
    total = int(offset.total_seconds())
    sign = "+" if total >= 0 else "-"
    total = abs(total)
    return f"{base}{sign}{total // 3600:02d}:{(total % 3600) // 60:02d}"


def parse_datetime(lexeme: str) -> datetime:
    m = _DATETIME.match(lexeme)
    if not m:
        raise TermError(f"malformed dateTime: {lexeme!r}")
    year, month, day, hh, mm, ss, frac, tz = m.groups()
    micro = int((frac[1:] + "000000")[:6]) if frac else 0
    if tz == "Z":
        tzinfo = timezone.utc
    else:
        sign = 1 if tz[0] == "+" else -1
        tzinfo = timezone(sign * timedelta(hours=int(tz[1:3]), minutes=int(tz[4:6])))
    try:
        return datetime(int(year), int(month), int(day), int(hh), int(mm), int(ss),
                        micro, tzinfo=tzinfo)
    except ValueError as exc:
        raise TermError(f"malformed dateTime: {lexeme!r} ({exc})") from None


def is_datetime_lexeme(lexeme: str) -> bool:
    return bool(_DATETIME.match(lexeme))


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def quote_string(s: str) -> str:
    return '"' + "".join(_ESCAPES.get(c, c) for c in s) + '"'


def numeric_literal(lexeme: str) -> Int | Dec:
    """Classify an unquoted number by lexical form.

    Exponent forms (xsd:double) become ``Dec``: float and double are treated
    as lexical variants of decimal.
    """
    try:
        if _INTEGER.match(lexeme):
            return Int(int(lexeme))
        if _DECIMAL.match(lexeme) or _DOUBLE.match(lexeme):
            return Dec(Decimal(lexeme))
    except InvalidOperation:
        pass
    raise TermError(f"malformed number: {lexeme!r}")


def typed_literal(lexical: str, datatype: str) -> Term:
    """Map a datatyped literal onto one of the five simple types.

    Raises :class:`UnknownDatatype` for datatypes outside the supported
    table and :class:`TermError` for lexical forms invalid for their type.
    """
    if datatype in (XSD_STRING, RDF_LANGSTRING):
        return Str(lexical)
    if datatype == XSD_INTEGER:
        if not _INTEGER.match(lexical.strip()):
            raise TermError(f"invalid xsd:integer {lexical!r}")
        return Int(int(lexical))
    if datatype in (XSD_DECIMAL, XSD_FLOAT, XSD_DOUBLE):
        text = lexical.strip()
        if not (_INTEGER.match(text) or _DECIMAL.match(text) or _DOUBLE.match(text)):
            raise TermError(f"invalid numeric literal {lexical!r}")
        return Dec(Decimal(text))
    if datatype == XSD_DATETIME:
        return DateTime(parse_datetime(lexical.strip()))
    if datatype == XSD_ANYURI:
        return Uri(lexical)
    raise UnknownDatatype(datatype)


class UnknownDatatype(TermError):
    def __init__(self, datatype: str):
        super().__init__(f"unsupported literal datatype <{datatype}>")
        self.datatype = datatype


def expand_pname(pname: str, prefixes: Mapping[str, str]) -> Uri:
    prefix, _, local = pname.partition(":")
    if prefix not in prefixes:
        raise TermError(f"undeclared prefix {prefix!r}")
    return Uri(prefixes[prefix] + local)


_STRING_TOKEN = re.compile(
    r'^"((?:[^"\\]|\\.)*)"(?:@([A-Za-z]+(?:-[A-Za-z0-9]+)*)|\^\^(\S+))?$', re.S
)


def unescape(body: str) -> str:
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c != "\\":
            out.append(c)
            i += 1
            continue
        nxt = body[i + 1] if i + 1 < len(body) else ""
        if nxt in "tbnrf\"'\\":
            out.append({"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f"}.get(nxt, nxt))
            i += 2
        elif nxt == "u":
            out.append(chr(int(body[i + 2:i + 6], 16)))
            i += 6
        elif nxt == "U":
            out.append(chr(int(body[i + 2:i + 10], 16)))
            i += 10
        else:
            raise TermError(f"bad escape \\{nxt}")
    return "".join(out)


def parse_term(lexeme: str, prefixes: Mapping[str, str] | None = None) -> Term:
    """Classify one surface-syntax token as a term.

    >>> parse_term("99.9")
    Dec(value=Decimal('99.9'))
    """
    prefixes = prefixes or {}
    lexeme = lexeme.strip()
    if not lexeme:
        raise TermError("empty term")
    if lexeme.startswith("<") and lexeme.endswith(">"):
        return Uri(lexeme[1:-1])
    if lexeme.startswith("$"):
        return Var(lexeme[1:])
    if lexeme.startswith('"'):
        m = _STRING_TOKEN.match(lexeme)
        if not m:
            raise TermError(f"malformed string literal: {lexeme!r}")
        body, lang, dt = m.groups()
        text = unescape(body)
        if dt is None:
            return Str(text, lang)
        return typed_literal(text, parse_term(dt, prefixes).value)
    if lexeme[0].isdigit() or lexeme[0] in "+-.":
        if is_datetime_lexeme(lexeme):
            return DateTime(parse_datetime(lexeme))
        return numeric_literal(lexeme)
    if ":" in lexeme:
        return expand_pname(lexeme, prefixes)
    raise TermError(f"unrecognised term: {lexeme!r}")


def lexical_form(t: Term) -> str:
    """The string ``str()`` yields for a term: IRI text or literal lexeme."""
    if isinstance(t, Uri):
        return t.value
    if isinstance(t, Str):
        return t.value
    if isinstance(t, Int):
        return str(t.value)
    if isinstance(t, Dec):
        return canonical_decimal(t.value)
    if isinstance(t, DateTime):
        return canonical_datetime(t.value)
    raise TypeError(f"no lexical form for {t!r}")


def nt_term(t: Term) -> str:
    """N-Triples/N-Quads rendering of a ground term."""
    if isinstance(t, Uri):
        return f"<{t.value}>"
    if isinstance(t, Str):
        s = quote_string(t.value)
        return f"{s}@{t.lang}" if t.lang else s
    if isinstance(t, Int):
        return f'"{t.value}"^^<{XSD_INTEGER}>'
    if isinstance(t, Dec):
        return f'"{canonical_decimal(t.value)}"^^<{XSD_DECIMAL}>'
    if isinstance(t, DateTime):
        return f'"{canonical_datetime(t.value)}"^^<{XSD_DATETIME}>'
    raise TypeError(f"cannot serialise non-ground term {t!r}")


_KIND_ORDER = {Uri: 0, Str: 1, Int: 2, Dec: 3, DateTime: 4, Var: 5, BlankLabel: 6}


def term_key(t) -> tuple:
    """Canonical total order over terms, used to make results reproducible."""
    if isinstance(t, Str):
        return (1, t.value, t.lang or "")
    if isinstance(t, (Int, Dec)):
        return (_KIND_ORDER[type(t)], "", t.value)
    if isinstance(t, DateTime):
        return (4, canonical_datetime(t.value), "")
    if isinstance(t, Var):
        return (5, t.name, "")
    if isinstance(t, BlankLabel):
        return (6, t.label, "")
    return (0, t.value, "")


def is_ground(t) -> bool:
    return not isinstance(t, (Var, BlankLabel))
