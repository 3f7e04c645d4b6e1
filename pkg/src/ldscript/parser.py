"""Concrete syntax for scripts (``.lds`` files).

The surface follows SPARQL conventions::

    prefix res: <http://dbpedia.org/resource/>
    prefix dbp: <http://dbpedia.org/property/>

    from named res:Kazakhstan
    select $x : Res
    where {
      graph res:Kazakhstan { res:Kazakhstan dbp:capital $x }
    }
    from named $x

Keywords are case-insensitive.  ``rdf:``, ``rdfs:``, ``xsd:`` and ``owl:``
are predeclared; every other prefix must be declared.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import regex as rx
from .syntax import (
    Abs, And, BinOp, Compare, Data, FromNamed, GraphPattern, Haversine,
    Iterate, Join, LangMatches, Not, Now, Or, Regex, Select, StrOf, UNIT,
    Union_, Where,
)
from .terms import (
    DEFAULT_PREFIXES, OWL, RDFS, DateTime, Str, TermError, Triple, Uri, Var,
    numeric_literal, parse_datetime, typed_literal, unescape,
)
from .typesystem import DATATYPES, RES, Property, Simple


_TOKEN_SPEC = [
    ("WS", r"[ \t\r\n]+|#[^\n]*"),
    ("IRIREF", r'<[^<>"{}|^`\\\x00-\x20]*>'),
    ("STRING", r'"(?:[^"\\\n\r]|\\.)*"'),
    ("LANGTAG", r"@[A-Za-z]+(?:-[A-Za-z0-9]+)*"),
    ("DTYPE", r"\^\^"),
    ("VAR", r"\$[A-Za-z_][A-Za-z0-9_]*"),
    ("DATETIME", r"\d{4,}-\d{1,2}-\d{1,2}T\d{2}:\d{2}:\d{2}(?:\.\d+)?(?:Z|[+-]\d{2}:\d{2})"),
    ("NUMBER", r"\d+\.\d*[eE][+-]?\d+|\.\d+[eE][+-]?\d+|\d+[eE][+-]?\d+|\d*\.\d+|\d+"),
    ("PNAME", r"[A-Za-z](?:[\w.-]*[\w-])?:(?:[\w-](?:[\w.-]*[\w-])?)?"),
    ("NAME", r"[A-Za-z_][A-Za-z0-9_]*"),
    ("OP", r"&&|\|\||[!=<+\-(){},:.]"),
]
_MASTER = re.compile("|".join(f"(?P<{n}>{p})" for n, p in _TOKEN_SPEC))

_SIMPLE_BY_NAME = {"Res": RES}
_RESOURCE_ALIASES = {RDFS + "Resource", OWL + "Thing"}


class ScriptSyntaxError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


@dataclass
class Program:
    script: object
    prefixes: dict = field(default_factory=dict)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int

    @property
    def pos(self):
        return (self.line, self.col)

    def is_kw(self, word: str) -> bool:
        return self.kind == "NAME" and self.text.lower() == word.lower()

    def is_op(self, op: str) -> bool:
        return self.kind == "OP" and self.text == op


def tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _MASTER.match(text, pos)
        if not m:
            raise ScriptSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind, s = m.lastgroup, m.group()
        if kind != "WS":
            toks.append(_Tok(kind, s, line, pos - line_start + 1))
        if "\n" in s:
            line += s.count("\n")
            line_start = pos + s.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("EOF", "", line, pos - line_start + 1))
    return toks


class _Backtrack(Exception):
    pass


class ScriptParser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.prefixes = dict(DEFAULT_PREFIXES)
        self.declared: dict[str, str] = {}

    # -- token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, message: str, tok: _Tok | None = None) -> ScriptSyntaxError:
        tok = tok or self.tok
        return ScriptSyntaxError(message, tok.line, tok.col)

    def found(self) -> str:
        return repr(self.tok.text) if self.tok.kind != "EOF" else "end of input"

    def expect_op(self, op: str) -> _Tok:
        if not self.tok.is_op(op):
            raise self.error(f"expected {op!r}, found {self.found()}")
        return self.advance()

    def expect_kw(self, word: str) -> _Tok:
        if not self.tok.is_kw(word):
            raise self.error(f"expected {word!r}, found {self.found()}")
        return self.advance()

    # -- program
    def program(self) -> Program:
        while self.tok.is_kw("prefix"):
            self.prefix_decl()
        script = self.block()
        if self.tok.kind != "EOF":
            raise self.error(f"unexpected {self.found()}")
        return Program(script, dict(self.declared))

    def prefix_decl(self):
        self.advance()
        name = self.advance()
        if name.kind != "PNAME" or not name.text.endswith(":"):
            raise self.error("expected a prefix name such as 'dbp:'", name)
        iri = self.advance()
        if iri.kind != "IRIREF":
            raise self.error("expected an IRI in angle brackets", iri)
        value = self._iri_text(iri)
        self.prefixes[name.text[:-1]] = value
        self.declared[name.text[:-1]] = value

    def block(self):
        """Statements up to '}' or end of input; Unit is implicit."""
        stmts = []
        while self.tok.kind != "EOF" and not self.tok.is_op("}"):
            t = self.tok
            if t.is_kw("from"):
                self.advance()
                self.expect_kw("named")
                stmts.append(("from", t.pos, self.term()))
            elif t.is_kw("select"):
                self.advance()
                group = [self.select_item()]
                while self.tok.is_op(","):
                    self.advance()
                    group.append(self.select_item())
                stmts.append(("select", t.pos, group))
            elif t.is_kw("where"):
                self.advance()
                self.expect_op("{")
                q = self.group()
                self.expect_op("}")
                stmts.append(("where", t.pos, q))
            elif t.is_kw("iterate"):
                self.advance()
                self.expect_op("{")
                body = self.block()
                self.expect_op("}")
                stmts.append(("iterate", t.pos, body))
                if self.tok.kind != "EOF" and not self.tok.is_op("}"):
                    raise self.error("iterate must be the last statement of its block")
            else:
                raise self.error(f"expected a statement, found {self.found()}")
        script = UNIT
        for kind, pos, payload in reversed(stmts):
            if kind == "from":
                script = FromNamed(payload, script, pos=pos)
            elif kind == "where":
                script = Where(payload, script, pos=pos)
            elif kind == "iterate":
                script = Iterate(payload, pos=pos)
            else:
                for var, typ, vpos in reversed(payload):
                    script = Select(var, typ, script, pos=vpos)
        return script

    def select_item(self):
        t = self.advance()
        if t.kind != "VAR":
            raise self.error(f"expected a variable, found {t.text!r}", t)
        typ = None
        if self.tok.is_op(":"):
            self.advance()
            typ = self.type_expr()
        return t.text[1:], typ, t.pos

    def type_expr(self):
        t = self.tok
        if t.kind == "NAME" and t.text == "Property":
            self.advance()
            self.expect_op("(")
            inner = self.type_expr()
            self.expect_op(")")
            if not isinstance(inner, Simple):
                raise self.error("property types take a simple type", t)
            return Property(inner.of)
        if t.kind == "NAME" and t.text in _SIMPLE_BY_NAME:
            self.advance()
            return Simple(_SIMPLE_BY_NAME[t.text])
        if t.kind in ("PNAME", "IRIREF"):
            uri = self.resource(self.advance())
            if uri.value in _RESOURCE_ALIASES:
                return Simple(RES)
            if uri.value in DATATYPES and not uri.value.endswith(("float", "double")):
                return Simple(DATATYPES[uri.value])
            raise self.error(f"{uri} is not a type", t)
        raise self.error(f"expected a type, found {self.found()}")

    # -- queries
    def group(self):
        q = self.conj()
        while self.tok.is_kw("union"):
            pos = self.advance().pos
            q = Union_(q, self.conj(), pos=pos)
        return q

    def conj(self):
        items = []  # (query, is_raw_graph_block)
        start = self.tok
        while not (self.tok.is_op("}") or self.tok.is_kw("union") or self.tok.kind == "EOF"):
            t = self.tok
            if t.is_kw("graph"):
                block = self.graph_block()
                if items and items[-1][1]:
                    prev = items[-1][0]
                    items[-1] = (Data(prev.blocks + (block,), pos=prev.pos), True)
                else:
                    items.append((Data((block,), pos=t.pos), True))
            elif t.is_op("{"):
                self.advance()
                q = self.group()
                self.expect_op("}")
                items.append((q, False))
            else:
                items.append((self.filter(), False))
        if not items:
            raise self.error("empty query", start)
        q = items[0][0]
        for item, _ in items[1:]:
            q = Join(q, item, pos=getattr(item, "pos", None))
        return q

    def graph_block(self) -> GraphPattern:
        pos = self.advance().pos
        g = self.term()
        self.expect_op("{")
        triples = []
        while not self.tok.is_op("}"):
            start = self.tok
            parts = []
            for _ in range(3):
                if self.tok.is_op("}") or self.tok.is_op(".") or self.tok.kind == "EOF":
                    raise self.error("a triple needs three terms", start if parts else self.tok)
                parts.append(self.term())
            triples.append(Triple(*parts))
            if self.tok.is_op("."):
                self.advance()
        self.advance()
        return GraphPattern(g, tuple(triples), pos=pos)

    # -- filters
    def filter(self):
        left = self.and_filter()
        while self.tok.is_op("||"):
            pos = self.advance().pos
            left = Or(left, self.and_filter(), pos=pos)
        return left

    def and_filter(self):
        left = self.unary_filter()
        while self.tok.is_op("&&"):
            pos = self.advance().pos
            left = And(left, self.unary_filter(), pos=pos)
        return left

    def unary_filter(self):
        t = self.tok
        if t.is_op("!"):
            self.advance()
            return Not(self.unary_filter(), pos=t.pos)
        if t.is_kw("regex") or t.is_kw("langMatches"):
            self.advance()
            self.expect_op("(")
            arg = self.expr()
            self.expect_op(",")
            lit = self.advance()
            if lit.kind != "STRING":
                raise self.error("expected a string literal", lit)
            text = self._string_body(lit)
            self.expect_op(")")
            if t.is_kw("regex"):
                try:
                    rx.validate(text)
                except rx.RegexSyntaxError as exc:
                    raise self.error(str(exc), lit) from None
                return Regex(arg, text, pos=t.pos)
            if text != "*" and not re.fullmatch(r"[A-Za-z]{1,8}(-[A-Za-z0-9]{1,8})*", text):
                raise self.error(f"malformed language range {text!r}", lit)
            return LangMatches(arg, text.lower(), pos=t.pos)
        if t.is_op("("):
            save = self.i
            try:
                self.advance()
                inner = self.filter()
                if not self.tok.is_op(")"):
                    raise _Backtrack
                self.advance()
                return inner
            except (_Backtrack, ScriptSyntaxError):
                self.i = save
        return self.comparison()

    def comparison(self):
        left = self.expr()
        op = self.tok
        if not (op.is_op("=") or op.is_op("<")):
            raise self.error(f"expected '=' or '<' after expression, found {self.found()}")
        self.advance()
        return Compare(op.text, left, self.expr(), pos=op.pos)

    # -- expressions
    def expr(self):
        left = self.primary()
        while self.tok.is_op("+") or self.tok.is_op("-"):
            op = self.advance()
            left = BinOp(op.text, left, self.primary(), pos=op.pos)
        return left

    def primary(self):
        t = self.tok
        if t.kind == "NAME":
            name = t.text.lower()
            if name == "now":
                self.advance()
                return Now(pos=t.pos)
            if name in ("str", "abs", "haversine"):
                self.advance()
                self.expect_op("(")
                args = [self.expr()]
                while self.tok.is_op(","):
                    self.advance()
                    args.append(self.expr())
                self.expect_op(")")
                arity = 4 if name == "haversine" else 1
                if len(args) != arity:
                    raise self.error(f"{name} takes {arity} argument(s), got {len(args)}", t)
                if name == "str":
                    return StrOf(args[0], pos=t.pos)
                if name == "abs":
                    return Abs(args[0], pos=t.pos)
                return Haversine(*args, pos=t.pos)
        if t.is_op("("):
            self.advance()
            e = self.expr()
            self.expect_op(")")
            return e
        return self.term()

    # -- terms
    def term(self):
        t = self.advance()
        try:
            if t.kind in ("IRIREF", "PNAME"):
                return self.resource(t)
            if t.kind == "VAR":
                return Var(t.text[1:])
            if t.kind == "STRING":
                body = self._string_body(t)
                if self.tok.kind == "LANGTAG":
                    return Str(body, self.advance().text[1:])
                if self.tok.kind == "DTYPE":
                    self.advance()
                    dt = self.resource(self.advance())
                    return typed_literal(body, dt.value)
                return Str(body)
            if t.kind == "NUMBER":
                return numeric_literal(t.text)
            if t.is_op("-") and self.tok.kind == "NUMBER":
                return numeric_literal("-" + self.advance().text)
            if t.kind == "DATETIME":
                return DateTime(parse_datetime(t.text))
        except TermError as exc:
            raise self.error(str(exc), t) from None
        raise self.error(f"expected a term, found {t.text!r}" if t.kind != "EOF"
                         else "expected a term, found end of input", t)

    def resource(self, t: _Tok) -> Uri:
        if t.kind == "IRIREF":
            return Uri(self._iri_text(t))
        if t.kind == "PNAME":
            prefix, _, local = t.text.partition(":")
            if prefix not in self.prefixes:
                raise self.error(f"undeclared prefix {prefix!r}", t)
            try:
                return Uri(self.prefixes[prefix] + local)
            except TermError as exc:
                raise self.error(str(exc), t) from None
        raise self.error(f"expected an IRI, found {t.text!r}", t)

    def _iri_text(self, t: _Tok) -> str:
        try:
            return Uri(unescape(t.text[1:-1])).value
        except (TermError, ValueError) as exc:
            raise self.error(f"malformed IRI: {exc}", t) from None

    def _string_body(self, t: _Tok) -> str:
        try:
            return unescape(t.text[1:-1])
        except (TermError, ValueError) as exc:
            raise self.error(str(exc), t) from None


def parse_program(text: str) -> Program:
    return ScriptParser(text).program()


def parse_script(text: str):
    return parse_program(text).script

