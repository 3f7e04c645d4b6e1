"""Types, the subtype lattice, the ontology map and the typing judgments.

There are five simple types and five property types.  Property types are
contravariant in their range and all sit below ``Res``::

                         Res
        /        /        |         \\          \\
  P(string)  P(dateTime)  P(integer)  P(Res)
                          |
                      P(decimal)

plus ``integer <= decimal`` among the simple types.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from .terms import (
    OWL, RDF, RDFS, XSD_ANYURI, XSD_DATETIME, XSD_DECIMAL, XSD_DOUBLE,
    XSD_FLOAT, XSD_INTEGER, XSD_STRING, BlankLabel, DateTime, Dec, Int, Str,
    Triple, Uri, Var,
)

log = logging.getLogger(__name__)

RDFS_RANGE = Uri(RDFS + "range")
RDF_TYPE = Uri(RDF + "type")
OWL_OBJECT_PROPERTY = Uri(OWL + "ObjectProperty")
OWL_DATATYPE_PROPERTY = Uri(OWL + "DatatypeProperty")


class SimpleType(enum.Enum):
    RESOURCE = "Res"
    STRING = "xsd:string"
    INTEGER = "xsd:integer"
    DECIMAL = "xsd:decimal"
    DATETIME = "xsd:dateTime"

    def __str__(self):
        return self.value


RES = SimpleType.RESOURCE
STRING = SimpleType.STRING
INTEGER = SimpleType.INTEGER
DECIMAL = SimpleType.DECIMAL
DATETIME = SimpleType.DATETIME


@dataclass(frozen=True)
class Simple:
    of: SimpleType

    def __str__(self):
        return str(self.of)


@dataclass(frozen=True)
class Property:
    of: SimpleType

    def __str__(self):
        return f"Property({self.of})"


Type = Union[Simple, Property]

SIMPLE_TYPES = tuple(SimpleType)
UNIVERSE: tuple = tuple(Simple(s) for s in SIMPLE_TYPES) + tuple(Property(s) for s in SIMPLE_TYPES)

# datatype URI -> simple type; float/double alias decimal, anyURI is Res
DATATYPES = {
    XSD_STRING: STRING,
    XSD_INTEGER: INTEGER,
    XSD_DECIMAL: DECIMAL,
    XSD_FLOAT: DECIMAL,
    XSD_DOUBLE: DECIMAL,
    XSD_DATETIME: DATETIME,
    XSD_ANYURI: RES,
}


class TypeCheckError(Exception):
    """A typing judgment failed.

    ``node`` is the syntax node closest to the failure, when known; the
    script checker uses its source position for diagnostics.
    """

    def __init__(self, message: str, node=None, expected=None, actual=None):
        super().__init__(message)
        self.message = message
        self.node = node
        self.expected = expected
        self.actual = actual

    def at(self, node):
        if self.node is None or getattr(self.node, "pos", None) is None:
            self.node = node
        return self


class UnboundVariable(TypeCheckError):
    pass


class OntologyConflict(ValueError):
    def __init__(self, conflicts: Mapping):
        self.conflicts = dict(conflicts)
        lines = [f"{u}: {', '.join(sorted(map(str, ts)))}" for u, ts in sorted(
            self.conflicts.items(), key=lambda kv: kv[0].value)]
        super().__init__("conflicting property types:\n  " + "\n  ".join(lines))


# ---------------------------------------------------------------- lattice

def simple_subtype(a: SimpleType, b: SimpleType) -> bool:
    return a == b or (a == INTEGER and b == DECIMAL)


def subtype(a: Type, b: Type) -> bool:
    if a == b:
        return True
    if isinstance(a, Simple) and isinstance(b, Simple):
        return simple_subtype(a.of, b.of)
    if isinstance(a, Property) and isinstance(b, Property):
        return simple_subtype(b.of, a.of)
    return isinstance(a, Property) and b == Simple(RES)


def join(a: Type, b: Type) -> Type | None:
    """Least upper bound in the lattice, or None when there is none."""
    uppers = [t for t in UNIVERSE if subtype(a, t) and subtype(b, t)]
    least = [t for t in uppers if all(subtype(t, u) for u in uppers)]
    return least[0] if least else None


def meet(a: Type, b: Type) -> Type | None:
    lowers = [t for t in UNIVERSE if subtype(t, a) and subtype(t, b)]
    greatest = [t for t in lowers if all(subtype(l, t) for l in lowers)]
    return greatest[0] if greatest else None


def greatest(types: Iterable[Type]) -> Type | None:
    ts = list(types)
    for t in ts:
        if all(subtype(u, t) for u in ts):
            return t
    return None


def parse_type(text: str) -> Type:
    """Parse ``Res``, ``xsd:decimal`` or ``Property(xsd:string)``."""
    text = text.strip()
    if text.startswith("Property(") and text.endswith(")"):
        inner = parse_type(text[len("Property("):-1])
        if not isinstance(inner, Simple):
            raise ValueError(f"nested property type: {text!r}")
        return Property(inner.of)
    for s in SIMPLE_TYPES:
        if s.value == text:
            return Simple(s)
    raise ValueError(f"unknown type: {text!r}")


# ---------------------------------------------------------------- environments

class TypeEnv:
    """Ordered variable typings; lookup takes the first (innermost) match."""

    __slots__ = ("_entries",)

    def __init__(self, entries: Iterable[tuple[str, Type]] = ()):
        self._entries = tuple(entries)

    def extend(self, name: str, t: Type) -> "TypeEnv":
        return TypeEnv(((name, t),) + self._entries)

    def lookup(self, name: str) -> Type | None:
        for n, t in self._entries:
            if n == name:
                return t
        return None

    def __contains__(self, name):
        return self.lookup(name) is not None

    def __iter__(self):
        return iter(self._entries)

    def __eq__(self, other):
        return isinstance(other, TypeEnv) and self._entries == other._entries

    def __repr__(self):
        return "TypeEnv(" + ", ".join(f"${n}: {t}" for n, t in self._entries) + ")"


EMPTY_ENV = TypeEnv()


class Ontology(Mapping):
    """Finite partial map from property URIs to property types."""

    def __init__(self, entries: Mapping[Uri, Property] | Iterable = ()):
        data = dict(entries)
        for uri, t in data.items():
            if not isinstance(uri, Uri) or not isinstance(t, Property):
                raise ValueError(f"ontology entries map URIs to property types: {uri} -> {t}")
        self._data = data

    def __getitem__(self, uri):
        return self._data[uri]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __repr__(self):
        return f"Ontology({len(self._data)} properties)"

    def merge(self, other: "Ontology") -> "Ontology":
        return _merge_candidates(
            (u, t) for src in (self, other) for u, t in src.items())


# ---------------------------------------------------------------- term typing

def classify_literal(t) -> SimpleType:
    if isinstance(t, Uri):
        return RES
    if isinstance(t, Str):
        return STRING
    if isinstance(t, Int):
        return INTEGER
    if isinstance(t, Dec):
        return DECIMAL
    if isinstance(t, DateTime):
        return DATETIME
    raise TypeError(f"cannot classify {t!r}")


def base_type(u: Uri, ont: Mapping) -> Type:
    return ont.get(u, Simple(RES))


def term_type(env: TypeEnv, t, ont: Mapping) -> Type:
    """The least type of a term."""
    if isinstance(t, Var):
        found = env.lookup(t.name)
        if found is None:
            raise UnboundVariable(f"unbound variable ${t.name}")
        return found
    if isinstance(t, Uri):
        return base_type(t, ont)
    if isinstance(t, BlankLabel):
        raise TypeCheckError(f"blank node {t} cannot be typed")
    return Simple(classify_literal(t))


def has_type(env: TypeEnv, t, target: Type, ont: Mapping) -> bool:
    return subtype(term_type(env, t, ont), target)


def simple_view(t: Type) -> SimpleType:
    """A term usable as an expression is a URI (Res) or a literal."""
    return RES if isinstance(t, Property) else t.of


# ---------------------------------------------------------------- data typing

def check_triple(env: TypeEnv, tr: Triple, ont: Mapping) -> None:
    """Raise TypeCheckError unless the triple is well typed.

    Accepted forms: ``s p o`` with s:Res, p:Property(σ), o:σ; ``p rdfs:range D``
    with p:Property(σ_D); ``p rdf:type owl:ObjectProperty`` with
    p:Property(Res).
    """
    s, p, o = tr
    if isinstance(o, Uri) and p == RDFS_RANGE:
        rng = DATATYPES.get(o.value, RES)
        if has_type(env, s, Property(rng), ont):
            return
    if p == RDF_TYPE and o == OWL_OBJECT_PROPERTY:
        if has_type(env, s, Property(RES), ont):
            return
    if not has_type(env, s, Simple(RES), ont):
        raise TypeCheckError(
            f"subject {s} is not a resource", expected=Simple(RES),
            actual=term_type(env, s, ont))
    pt = term_type(env, p, ont)
    if not isinstance(pt, Property):
        raise TypeCheckError(
            f"predicate {p} has type {pt}, not a property type",
            expected="Property(σ)", actual=pt)
    for sigma in SIMPLE_TYPES:
        if has_type(env, p, Property(sigma), ont) and has_type(env, o, Simple(sigma), ont):
            return
    raise TypeCheckError(
        f"object {o} has type {term_type(env, o, ont)} but {p} expects {pt.of}",
        expected=Simple(pt.of), actual=term_type(env, o, ont))


def check_graph(env: TypeEnv, graph, triples, ont: Mapping) -> None:
    if not has_type(env, graph, Simple(RES), ont):
        raise TypeCheckError(
            f"graph name {graph} is not a resource", expected=Simple(RES),
            actual=term_type(env, graph, ont))
    for tr in triples:
        check_triple(env, tr, ont)


def admit_triples(triples, ont: Mapping):
    """Split ground triples into (admitted, rejected-with-reason), keeping order."""
    admitted, rejected = [], []
    for tr in triples:
        try:
            check_triple(EMPTY_ENV, tr, ont)
        except TypeCheckError as exc:
            log.info("rejected %s: %s", tr, exc.message)
            rejected.append((tr, exc.message))
        else:
            admitted.append(tr)
    return admitted, rejected


def derive_ontology(triples) -> Ontology:
    """Build Ont from ``rdfs:range`` and ``owl:ObjectProperty`` statements.

    Several comparable declarations for one property resolve to their meet
    (every declaration stays satisfiable); incomparable ones are a conflict.
    """
    candidates = []
    for tr in triples:
        s, p, o = tr
        if not isinstance(s, Uri):
            continue
        if p == RDFS_RANGE and isinstance(o, Uri):
            candidates.append((s, Property(DATATYPES.get(o.value, RES))))
        elif p == RDF_TYPE and o == OWL_OBJECT_PROPERTY:
            candidates.append((s, Property(RES)))
    return _merge_candidates(candidates)


def _merge_candidates(candidates) -> Ontology:
    seen: dict[Uri, set] = {}
    for uri, t in candidates:
        seen.setdefault(uri, set()).add(t)
    result, conflicts = {}, {}
    for uri, ts in seen.items():
        acc = None
        for t in sorted(ts, key=str):
            acc = t if acc is None else _comparable_meet(acc, t)
            if acc is None:
                break
        if acc is None:
            conflicts[uri] = ts
        else:
            result[uri] = acc
    if conflicts:
        raise OntologyConflict(conflicts)
    return Ontology(result)


def _comparable_meet(a, b):
    if subtype(a, b):
        return a
    if subtype(b, a):
        return b
    return None
