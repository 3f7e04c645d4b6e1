"""Abstract syntax of scripts, plus substitution and pretty-printing.

Every node carries an optional source position (``pos``) that is excluded
from equality, so parsed and hand-built trees compare equal.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Mapping, Union

from .terms import (
    DEFAULT_PREFIXES, DateTime, Dec, Int, Str, Triple, Uri, Var, canonical_datetime,
    canonical_decimal, quote_string,
)
from .typesystem import Property, Simple, Type

_pos = dict(default=None, compare=False, repr=False)


# ---------------------------------------------------------------- expressions

@dataclass(frozen=True)
class Now:
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class StrOf:
    arg: "Expr"
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class Abs:
    arg: "Expr"
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class BinOp:
    op: str  # "+" or "-"
    left: "Expr"
    right: "Expr"
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class Haversine:
    lat1: "Expr"
    long1: "Expr"
    lat2: "Expr"
    long2: "Expr"
    pos: tuple | None = field(**_pos)

    @property
    def args(self):
        return (self.lat1, self.long1, self.lat2, self.long2)


Expr = Union[Uri, Var, Str, Int, Dec, DateTime, Now, StrOf, Abs, BinOp, Haversine]

# ---------------------------------------------------------------- filters


@dataclass(frozen=True)
class Regex:
    arg: Expr
    pattern: str
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class LangMatches:
    arg: Expr
    range: str
    pos: tuple | None = field(**_pos)

    def __post_init__(self):
        # ranges compare case-insensitively
        object.__setattr__(self, "range", self.range.lower())


@dataclass(frozen=True)
class Compare:
    op: str  # "=" or "<"
    left: Expr
    right: Expr
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class And:
    left: "Filter"
    right: "Filter"
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class Or:
    left: "Filter"
    right: "Filter"
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class Not:
    arg: "Filter"
    pos: tuple | None = field(**_pos)


Filter = Union[Regex, LangMatches, Compare, And, Or, Not]
FILTER_TYPES = (Regex, LangMatches, Compare, And, Or, Not)

# ---------------------------------------------------------------- queries


@dataclass(frozen=True)
class GraphPattern:
    graph: object
    triples: tuple
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class Data:
    blocks: tuple  # of GraphPattern
    pos: tuple | None = field(**_pos)

    def quads(self):
        for b in self.blocks:
            for tr in b.triples:
                yield b.graph, tr


@dataclass(frozen=True)
class Join:
    left: "Query"
    right: "Query"
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class Union_:
    left: "Query"
    right: "Query"
    pos: tuple | None = field(**_pos)


Query = Union[Data, Filter, Join, Union_]

# ---------------------------------------------------------------- scripts


@dataclass(frozen=True)
class Unit:
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class Where:
    query: Query
    rest: "Script"
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class FromNamed:
    term: object
    rest: "Script"
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class Select:
    var: str
    type: Type | None
    rest: "Script"
    pos: tuple | None = field(**_pos)


@dataclass(frozen=True)
class Iterate:
    body: "Script"
    pos: tuple | None = field(**_pos)


Script = Union[Where, FromNamed, Select, Iterate, Unit]
UNIT = Unit()


def select_group(s: Select):
    """Split consecutive selects into ([(var, type), ...], first non-select)."""
    group = []
    while isinstance(s, Select):
        group.append((s.var, s.type))
        s = s.rest
    return group, s


def make_selects(group, rest: Script, pos=None) -> Script:
    for var, t in reversed(group):
        rest = Select(var, t, rest, pos=pos)
    return rest


# ---------------------------------------------------------------- traversal

def subst_term(t, mu: Mapping[str, object]):
    if isinstance(t, Var) and t.name in mu:
        return mu[t.name]
    return t


def subst_expr(e, mu):
    if isinstance(e, (StrOf, Abs)):
        return replace(e, arg=subst_expr(e.arg, mu))
    if isinstance(e, BinOp):
        return replace(e, left=subst_expr(e.left, mu), right=subst_expr(e.right, mu))
    if isinstance(e, Haversine):
        return Haversine(*(subst_expr(a, mu) for a in e.args), pos=e.pos)
    if isinstance(e, Now):
        return e
    return subst_term(e, mu)


def subst_query(q, mu):
    if isinstance(q, Data):
        return Data(tuple(
            GraphPattern(subst_term(b.graph, mu),
                         tuple(Triple(*(subst_term(x, mu) for x in tr)) for tr in b.triples),
                         pos=b.pos)
            for b in q.blocks), pos=q.pos)
    if isinstance(q, (Join, Union_, And, Or)):
        return replace(q, left=subst_query(q.left, mu), right=subst_query(q.right, mu))
    if isinstance(q, Not):
        return replace(q, arg=subst_query(q.arg, mu))
    if isinstance(q, (Regex, LangMatches)):
        return replace(q, arg=subst_expr(q.arg, mu))
    if isinstance(q, Compare):
        return replace(q, left=subst_expr(q.left, mu), right=subst_expr(q.right, mu))
    raise TypeError(f"not a query: {q!r}")


def subst_script(s, mu):
    """Capture-avoiding substitution; a select of the same name shadows."""
    if not mu:
        return s
    if isinstance(s, Unit):
        return s
    if isinstance(s, Where):
        return replace(s, query=subst_query(s.query, mu), rest=subst_script(s.rest, mu))
    if isinstance(s, FromNamed):
        return replace(s, term=subst_term(s.term, mu), rest=subst_script(s.rest, mu))
    if isinstance(s, Select):
        inner = {k: v for k, v in mu.items() if k != s.var}
        return replace(s, rest=subst_script(s.rest, inner))
    if isinstance(s, Iterate):
        return replace(s, body=subst_script(s.body, mu))
    raise TypeError(f"not a script: {s!r}")


def expr_vars(e) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, (StrOf, Abs)):
        return expr_vars(e.arg)
    if isinstance(e, BinOp):
        return expr_vars(e.left) | expr_vars(e.right)
    if isinstance(e, Haversine):
        return set().union(*(expr_vars(a) for a in e.args))
    return set()


def query_vars(q) -> set[str]:
    if isinstance(q, Data):
        return {t.name for g, tr in q.quads() for t in (g, *tr) if isinstance(t, Var)}
    if isinstance(q, (Join, Union_, And, Or)):
        return query_vars(q.left) | query_vars(q.right)
    if isinstance(q, Not):
        return query_vars(q.arg)
    if isinstance(q, (Regex, LangMatches)):
        return expr_vars(q.arg)
    if isinstance(q, Compare):
        return expr_vars(q.left) | expr_vars(q.right)
    raise TypeError(f"not a query: {q!r}")


def data_vars(q) -> set[str]:
    """Variables bound by the graph patterns of a query (filters excluded)."""
    if isinstance(q, Data):
        return query_vars(q)
    if isinstance(q, (Join, Union_)):
        return data_vars(q.left) | data_vars(q.right)
    return set()


def script_free_vars(s, bound=frozenset()) -> set[str]:
    if isinstance(s, Unit):
        return set()
    if isinstance(s, Where):
        return (query_vars(s.query) - bound) | script_free_vars(s.rest, bound)
    if isinstance(s, FromNamed):
        here = {s.term.name} if isinstance(s.term, Var) and s.term.name not in bound else set()
        return here | script_free_vars(s.rest, bound)
    if isinstance(s, Select):
        return script_free_vars(s.rest, bound | {s.var})
    if isinstance(s, Iterate):
        return script_free_vars(s.body, bound)
    raise TypeError(f"not a script: {s!r}")


def flatten_join(q) -> list:
    if isinstance(q, Join):
        return flatten_join(q.left) + flatten_join(q.right)
    return [q]


def is_filter(q) -> bool:
    return isinstance(q, FILTER_TYPES)


# ---------------------------------------------------------------- printing

class Printer:
    """Renders scripts in the concrete syntax accepted by the parser.

    With ``prefixes`` the output starts with the prefix declarations that
    are actually used, and IRIs under them are written as prefixed names.
    """

    def __init__(self, prefixes: Mapping[str, str] | None = None, indent: str = "  "):
        self.prefixes = {**DEFAULT_PREFIXES, **(prefixes or {})}
        self.indent = indent
        self.used: set[str] = set()

    def term(self, t) -> str:
        if isinstance(t, Uri):
            for p, ns in sorted(self.prefixes.items(), key=lambda kv: -len(kv[1])):
                local = t.value[len(ns):]
                if t.value.startswith(ns) and _safe_local(local):
                    self.used.add(p)
                    return f"{p}:{local}"
            return f"<{t.value}>"
        if isinstance(t, Var):
            return f"${t.name}"
        if isinstance(t, Str):
            s = quote_string(t.value)
            return f"{s}@{t.lang}" if t.lang else s
        if isinstance(t, Int):
            return str(t.value)
        if isinstance(t, Dec):
            return canonical_decimal(t.value)
        if isinstance(t, DateTime):
            return canonical_datetime(t.value)
        raise TypeError(f"not a term: {t!r}")

    def type(self, t) -> str:
        if isinstance(t, Property):
            return f"Property({t.of})"
        if isinstance(t, Simple):
            return str(t.of)
        raise TypeError(f"not a type: {t!r}")

    def expr(self, e) -> str:
        if isinstance(e, Now):
            return "now"
        if isinstance(e, StrOf):
            return f"str({self.expr(e.arg)})"
        if isinstance(e, Abs):
            return f"abs({self.expr(e.arg)})"
        if isinstance(e, Haversine):
            return "haversine(" + ", ".join(self.expr(a) for a in e.args) + ")"
        if isinstance(e, BinOp):
            right = self.expr(e.right)
            if isinstance(e.right, BinOp):
                right = f"({right})"
            return f"{self.expr(e.left)} {e.op} {right}"
        return self.term(e)

    def filter(self, f) -> str:
        if isinstance(f, Regex):
            return f"regex({self.expr(f.arg)}, {quote_string(f.pattern)})"
        if isinstance(f, LangMatches):
            return f"langMatches({self.expr(f.arg)}, {quote_string(f.range)})"
        if isinstance(f, Compare):
            return f"{self.expr(f.left)} {f.op} {self.expr(f.right)}"
        if isinstance(f, Not):
            inner = self.filter(f.arg)
            return f"!{inner}" if isinstance(f.arg, (Regex, LangMatches, Not)) else f"!({inner})"
        if isinstance(f, And):
            left = self.filter(f.left)
            if isinstance(f.left, Or):
                left = f"({left})"
            right = self.filter(f.right)
            if isinstance(f.right, (And, Or)):
                right = f"({right})"
            return f"{left} && {right}"
        if isinstance(f, Or):
            right = self.filter(f.right)
            if isinstance(f.right, Or):
                right = f"({right})"
            return f"{self.filter(f.left)} || {right}"
        raise TypeError(f"not a filter: {f!r}")

    def block(self, b: GraphPattern, depth: int) -> list[str]:
        pad = self.indent * depth
        trs = [" ".join(self.term(x) for x in tr) for tr in b.triples]
        if len(trs) == 1:
            return [f"{pad}graph {self.term(b.graph)} {{ {trs[0]} }}"]
        return ([f"{pad}graph {self.term(b.graph)} {{"]
                + [f"{pad}{self.indent}{t}" for t in trs] + [f"{pad}}}"])

    def group(self, q, depth: int) -> list[str]:
        """Lines for the body of a ``{ ... }`` query group."""
        if isinstance(q, Union_):
            left = self.group(q.left, depth)
            right = self.conj(q.right, depth)
            if isinstance(q.right, Union_):
                right = self.braced(q.right, depth)
            return left + [self.indent * depth + "union"] + right
        return self.conj(q, depth)

    def conj(self, q, depth: int) -> list[str]:
        items = []
        while isinstance(q, Join):
            items.append(q.right)
            q = q.left
        items.append(q)
        items.reverse()
        lines = []
        prev_data = False
        for item in items:
            if isinstance(item, Data) and not prev_data:
                for b in item.blocks:
                    lines += self.block(b, depth)
            elif isinstance(item, (Data, Join, Union_)):
                lines += self.braced(item, depth)
            else:
                text = self.filter(item)
                if text.startswith("-"):
                    # would otherwise read as a subtraction continuing the previous item
                    text = f"({text})"
                lines.append(self.indent * depth + text)
            prev_data = isinstance(item, Data)
        return lines

    def braced(self, q, depth: int) -> list[str]:
        pad = self.indent * depth
        return [pad + "{"] + self.group(q, depth + 1) + [pad + "}"]

    def script(self, s, depth: int = 0) -> list[str]:
        pad = self.indent * depth
        lines = []
        while not isinstance(s, Unit):
            if isinstance(s, FromNamed):
                lines.append(f"{pad}from named {self.term(s.term)}")
                s = s.rest
            elif isinstance(s, Select):
                group, s = select_group(s)
                parts = [f"${v}" + (f" : {self.type(t)}" if t is not None else "")
                         for v, t in group]
                lines.append(f"{pad}select " + ", ".join(parts))
            elif isinstance(s, Where):
                lines += [f"{pad}where {{"] + self.group(s.query, depth + 1) + [f"{pad}}}"]
                s = s.rest
            elif isinstance(s, Iterate):
                lines += [f"{pad}iterate {{"] + self.script(s.body, depth + 1) + [f"{pad}}}"]
                break
            else:
                raise TypeError(f"not a script: {s!r}")
        return lines

    def render(self, s) -> str:
        body = self.script(s)
        header = [f"prefix {p}: <{self.prefixes[p]}>" for p in sorted(self.used)
                  if DEFAULT_PREFIXES.get(p) != self.prefixes[p]]
        if header and body:
            header.append("")
        return "\n".join(header + body) + ("\n" if body else "")


def _safe_local(local: str) -> bool:
    return bool(re.fullmatch(r"(?:[\w-](?:[\w.-]*[\w-])?)?", local))


def print_script(s, prefixes: Mapping[str, str] | None = None) -> str:
    return Printer(prefixes).render(s)
