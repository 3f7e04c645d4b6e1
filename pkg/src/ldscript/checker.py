"""Static typing of expressions, filters, queries and scripts.

``infer_select_types`` fills in omitted ``select`` annotations.  Each use of
a variable becomes a small constraint over the select variables it mentions;
domains over the ten types are pruned to arc consistency, then every
surviving candidate is confirmed by a backtracking search for a complete
assignment.  A variable is annotated with the greatest type in its
confirmed set.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Callable, Mapping

from .syntax import (
    Abs, And, BinOp, Compare, Data, FromNamed, Haversine, Iterate, Join,
    LangMatches, Not, Now, Or, Regex, Select, StrOf, Union_, Unit, Where,
    data_vars, expr_vars, select_group,
)
from .terms import Var
from .typesystem import (
    DATETIME, DECIMAL, EMPTY_ENV, INTEGER, RES, STRING, UNIVERSE, Simple,
    SimpleType, TypeCheckError, TypeEnv, UnboundVariable, check_graph,
    check_triple, greatest, has_type, simple_subtype, simple_view, term_type,
)


class InferenceError(TypeCheckError):
    pass


# ---------------------------------------------------------------- expressions

def _numeric(env, e, ont, what: str) -> SimpleType:
    t = type_expr(env, e, ont)
    if not simple_subtype(t, DECIMAL):
        raise TypeCheckError(f"{what} needs a number, got {t}", node=e,
                             expected=Simple(DECIMAL), actual=Simple(t))
    return t


def type_expr(env: TypeEnv, e, ont: Mapping) -> SimpleType:
    """Least simple type of an expression."""
    if isinstance(e, Now):
        return DATETIME
    if isinstance(e, StrOf):
        type_expr(env, e.arg, ont)
        return STRING
    if isinstance(e, Abs):
        return _numeric(env, e.arg, ont, "abs")
    if isinstance(e, BinOp):
        a = _numeric(env, e.left, ont, f"'{e.op}'")
        b = _numeric(env, e.right, ont, f"'{e.op}'")
        return INTEGER if a == b == INTEGER else DECIMAL
    if isinstance(e, Haversine):
        for arg in e.args:
            _numeric(env, arg, ont, "haversine")
        return DECIMAL
    try:
        return simple_view(term_type(env, e, ont))
    except TypeCheckError as exc:
        raise exc.at(e)


def _comparable(a: SimpleType, b: SimpleType) -> bool:
    return simple_subtype(a, b) or simple_subtype(b, a)


def check_filter(env: TypeEnv, f, ont: Mapping) -> None:
    try:
        if isinstance(f, (Regex, LangMatches)):
            t = type_expr(env, f.arg, ont)
            if t != STRING:
                name = "regex" if isinstance(f, Regex) else "langMatches"
                raise TypeCheckError(f"{name} needs a string, got {t}", node=f,
                                     expected=Simple(STRING), actual=Simple(t))
        elif isinstance(f, Compare):
            a = type_expr(env, f.left, ont)
            b = type_expr(env, f.right, ont)
            if not _comparable(a, b):
                raise TypeCheckError(f"cannot compare {a} with {b} using '{f.op}'",
                                     node=f, expected=Simple(a), actual=Simple(b))
        elif isinstance(f, (And, Or)):
            check_filter(env, f.left, ont)
            check_filter(env, f.right, ont)
        elif isinstance(f, Not):
            check_filter(env, f.arg, ont)
        else:
            raise TypeError(f"not a filter: {f!r}")
    except TypeCheckError as exc:
        raise exc.at(f)


def check_data(env: TypeEnv, d: Data, ont: Mapping) -> None:
    for block in d.blocks:
        try:
            check_graph(env, block.graph, block.triples, ont)
        except TypeCheckError as exc:
            raise exc.at(block)


def check_query(env: TypeEnv, q, ont: Mapping) -> None:
    if isinstance(q, Data):
        check_data(env, q, ont)
    elif isinstance(q, (Join, Union_)):
        check_query(env, q.left, ont)
        check_query(env, q.right, ont)
    else:
        check_filter(env, q, ont)


# ---------------------------------------------------------------- scripts

def check_binding_source(s: Select) -> None:
    """A select group must be followed by a where whose patterns bind it."""
    group, after = select_group(s)
    if not isinstance(after, Where):
        raise TypeCheckError(
            f"select ${group[0][0]} has no binding source: it must be followed by 'where'",
            node=s)
    bound = data_vars(after.query)
    for var, _ in group:
        if var not in bound:
            raise TypeCheckError(
                f"${var} is selected but no graph pattern of the following where binds it",
                node=s)


def check_script(s, ont: Mapping, env: TypeEnv = EMPTY_ENV) -> None:
    """Raise TypeCheckError unless ``s`` is well typed under ``env``."""
    group_start = True
    while True:
        if isinstance(s, Unit):
            return
        if isinstance(s, Where):
            check_query(env, s.query, ont)
            s, group_start = s.rest, True
        elif isinstance(s, FromNamed):
            try:
                if not has_type(env, s.term, Simple(RES), ont):
                    raise TypeCheckError(
                        f"from named needs a URI, got {s.term} : {term_type(env, s.term, ont)}",
                        node=s, expected=Simple(RES), actual=term_type(env, s.term, ont))
            except TypeCheckError as exc:
                raise exc.at(s)
            s, group_start = s.rest, True
        elif isinstance(s, Select):
            if s.type is None:
                raise TypeCheckError(f"${s.var} has no type annotation (run inference first)",
                                     node=s)
            if group_start:
                check_binding_source(s)
            env = env.extend(s.var, s.type)
            s, group_start = s.rest, False
        elif isinstance(s, Iterate):
            s, group_start = s.body, True
        else:
            raise TypeError(f"not a script: {s!r}")


def is_well_typed(s, ont: Mapping) -> bool:
    try:
        check_script(s, ont)
    except TypeCheckError:
        return False
    return True


# ---------------------------------------------------------------- inference

@dataclass
class _Constraint:
    scope: tuple  # ((name, var id), ...) for the variables it mentions
    check: Callable[[TypeEnv], None]
    node: object
    what: str

    @property
    def vids(self):
        return tuple(dict.fromkeys(v for _, v in self.scope))

    def holds(self, assignment: Mapping[int, object]) -> bool:
        env = TypeEnv((name, assignment[vid]) for name, vid in self.scope)
        try:
            self.check(env)
        except TypeCheckError:
            return False
        return True


def _atoms(f):
    if isinstance(f, (And, Or)):
        return _atoms(f.left) + _atoms(f.right)
    if isinstance(f, Not):
        return _atoms(f.arg)
    return [f]


def _term_vars(*terms):
    return {t.name for t in terms if isinstance(t, Var)}


class _Collector:
    def __init__(self, ont):
        self.ont = ont
        self.selects: list[Select] = []
        self.constraints: list[_Constraint] = []

    def add(self, names, scope, check, node, what):
        resolved = []
        for name in sorted(names):
            vid = next((v for n, v in scope if n == name), None)
            if vid is None:
                raise UnboundVariable(f"unbound variable ${name}", node=node)
            resolved.append((name, vid))
        self.constraints.append(_Constraint(tuple(resolved), check, node, what))

    def walk(self, s, scope=()):
        ont = self.ont
        while not isinstance(s, Unit):
            if isinstance(s, Select):
                vid = len(self.selects)
                self.selects.append(s)
                scope = ((s.var, vid),) + scope
                s = s.rest
            elif isinstance(s, FromNamed):
                term = s.term
                self.add(_term_vars(term), scope,
                         lambda env, t=term, n=s: _require_res(env, t, ont, n),
                         s, f"from named {term}")
                s = s.rest
            elif isinstance(s, Where):
                self.query(s.query, scope)
                s = s.rest
            elif isinstance(s, Iterate):
                s = s.body
            else:
                raise TypeError(f"not a script: {s!r}")

    def query(self, q, scope):
        ont = self.ont
        if isinstance(q, Data):
            for block in q.blocks:
                g = block.graph
                self.add(_term_vars(g), scope,
                         lambda env, g=g: check_graph(env, g, (), ont), block, f"graph {g}")
                for tr in block.triples:
                    self.add(_term_vars(*tr), scope,
                             lambda env, tr=tr: check_triple(env, tr, ont), block, f"triple {tr}")
        elif isinstance(q, (Join, Union_)):
            self.query(q.left, scope)
            self.query(q.right, scope)
        else:
            for atom in _atoms(q):
                names = expr_vars(atom.arg) if isinstance(atom, (Regex, LangMatches)) \
                    else expr_vars(atom.left) | expr_vars(atom.right)
                self.add(names, scope,
                         lambda env, a=atom: check_filter(env, a, ont), atom, "filter")


def _require_res(env, t, ont, node):
    if not has_type(env, t, Simple(RES), ont):
        raise TypeCheckError(f"from named needs a URI, got {t}", node=node)


def _position(node) -> str:
    pos = getattr(node, "pos", None)
    return f" at {pos[0]}:{pos[1]}" if pos else ""


def _prune(constraints, domains) -> None:
    """Generalised arc consistency over the constraint scopes."""
    changed = True
    while changed:
        changed = False
        for c in constraints:
            vids = c.vids
            if not vids:
                continue
            for v in vids:
                others = [o for o in vids if o != v]
                keep = []
                for t in domains[v]:
                    for combo in itertools.product(*(domains[o] for o in others)):
                        assignment = dict(zip(others, combo))
                        assignment[v] = t
                        if c.holds(assignment):
                            keep.append(t)
                            break
                if len(keep) != len(domains[v]):
                    domains[v] = keep
                    changed = True
                if not keep:
                    return


def _supported(constraints, domains, fixed_vid, fixed_type) -> bool:
    order = sorted(domains, key=lambda v: (v != fixed_vid, len(domains[v])))
    by_last: dict[int, list] = {}
    rank = {v: i for i, v in enumerate(order)}
    for c in constraints:
        if c.vids:
            last = max(c.vids, key=rank.__getitem__)
            by_last.setdefault(last, []).append(c)
    assignment: dict[int, object] = {}

    def search(i):
        if i == len(order):
            return True
        v = order[i]
        candidates = [fixed_type] if v == fixed_vid else domains[v]
        for t in candidates:
            assignment[v] = t
            if all(c.holds(assignment) for c in by_last.get(v, ())) and search(i + 1):
                return True
        del assignment[v]
        return False

    return search(0)


def infer_select_types(s, ont: Mapping):
    """Return ``s`` with every unannotated select annotated, or raise InferenceError."""
    col = _Collector(ont)
    try:
        col.walk(s)
    except UnboundVariable as exc:
        raise InferenceError(exc.message, node=exc.node) from None
    for c in col.constraints:
        if not c.vids and not c.holds({}):
            try:
                c.check(EMPTY_ENV)
            except TypeCheckError as exc:
                raise InferenceError(exc.message, node=exc.node or c.node) from None
    domains = {vid: ([sel.type] if sel.type is not None else list(UNIVERSE))
               for vid, sel in enumerate(col.selects)}
    _prune(col.constraints, domains)
    for vid, dom in domains.items():
        if not dom:
            raise _contradiction(col, vid)

    chosen = {}
    for vid, sel in enumerate(col.selects):
        if sel.type is not None:
            chosen[vid] = sel.type
            continue
        valid = [t for t in domains[vid] if _supported(col.constraints, domains, vid, t)]
        if not valid:
            raise _contradiction(col, vid)
        top = greatest(valid)
        if top is None:
            raise InferenceError(
                f"${sel.var} could have any of the incomparable types "
                f"{', '.join(map(str, valid))}; annotate it explicitly", node=sel)
        chosen[vid] = top

    result = _annotate(s, iter(range(len(col.selects))), chosen)
    try:
        check_script(result, ont)
    except TypeCheckError as exc:
        raise InferenceError(f"inferred annotations do not type the script: {exc.message}",
                             node=exc.node) from None
    return result


def _contradiction(col: _Collector, vid: int) -> InferenceError:
    sel = col.selects[vid]
    uses = [c for c in col.constraints if vid in c.vids]
    detail = "; ".join(f"{c.what}{_position(c.node)}" for c in uses)
    return InferenceError(f"no type for ${sel.var} satisfies all of its uses: {detail}",
                          node=sel)


def _annotate(s, counter, chosen):
    if isinstance(s, Unit):
        return s
    if isinstance(s, Select):
        vid = next(counter)
        return replace(s, type=chosen[vid], rest=_annotate(s.rest, counter, chosen))
    if isinstance(s, (Where, FromNamed)):
        return replace(s, rest=_annotate(s.rest, counter, chosen))
    if isinstance(s, Iterate):
        return replace(s, body=_annotate(s.body, counter, chosen))
    raise TypeError(f"not a script: {s!r}")


def needs_inference(s) -> bool:
    while not isinstance(s, Unit):
        if isinstance(s, Select):
            if s.type is None:
                return True
            s = s.rest
        elif isinstance(s, Iterate):
            s = s.body
        else:
            s = s.rest
    return False
