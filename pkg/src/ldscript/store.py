"""In-memory quad store, graph pattern matching and query evaluation."""
from __future__ import annotations

import logging
import threading
from collections import defaultdict
from typing import Iterable, Iterator, Mapping, Sequence

from .evaluate import Clock, EvaluationError, eval_filter, system_clock
from .rdfio import parse_nquads, serialize_nquads
from .syntax import Data, Join, Union_, data_vars, flatten_join, is_filter, query_vars
from .terms import BlankLabel, Quad, Triple, Uri, Var, term_key
from .typesystem import EMPTY_ENV, Ontology, TypeCheckError, check_triple

log = logging.getLogger(__name__)


class StoreError(Exception):
    pass


class QueryError(Exception):
    pass


class Binding(Mapping):
    """Immutable map from variable names to ground terms."""

    __slots__ = ("_items", "_dict")

    def __init__(self, items: Mapping | Iterable = ()):
        d = dict(items)
        for name, t in d.items():
            if isinstance(t, (Var, BlankLabel)):
                raise ValueError(f"binding ${name} to non-ground term {t}")
        self._dict = d
        self._items = tuple(sorted(d.items()))

    def __getitem__(self, name):
        return self._dict[name]

    def __iter__(self):
        return iter(k for k, _ in self._items)

    def __len__(self):
        return len(self._items)

    def __hash__(self):
        return hash(self._items)

    def __eq__(self, other):
        if isinstance(other, Binding):
            return self._items == other._items
        return isinstance(other, Mapping) and dict(self._items) == dict(other)

    def __repr__(self):
        return "{" + ", ".join(f"${k} -> {v}" for k, v in self._items) + "}"

    def key(self) -> tuple:
        return tuple((k, term_key(v)) for k, v in self._items)

    def compatible(self, other: Mapping) -> bool:
        return all(self._dict[k] == v for k, v in other.items() if k in self._dict)

    def merge(self, other: Mapping) -> "Binding":
        return Binding({**self._dict, **other})


EMPTY_BINDING = Binding()


class SolutionSet(Sequence):
    """Duplicate-free bindings in canonical order."""

    def __init__(self, bindings: Iterable[Binding] = ()):
        self._items = tuple(sorted(set(bindings), key=Binding.key))

    def __getitem__(self, i):
        return self._items[i]

    def __len__(self):
        return len(self._items)

    def __eq__(self, other):
        return isinstance(other, SolutionSet) and self._items == other._items

    def __repr__(self):
        return f"SolutionSet({list(self._items)})"

    def as_set(self) -> set:
        return set(self._items)


class QuadStore:
    """Ground quads with graph-keyed indexes.

    Every write re-checks the triple against the ontology the store was
    created with, so the store is well typed by construction.  One lock
    guards reads and writes.
    """

    def __init__(self, ont: Mapping | None = None):
        self.ont = ont if ont is not None else Ontology()
        self._quads: set[Quad] = set()
        self._index: dict[tuple, set[Quad]] = defaultdict(set)
        self.graph_info: dict[Uri, dict] = {}
        self._lock = threading.RLock()

    def __len__(self):
        return len(self._quads)

    def __contains__(self, q: Quad):
        return q in self._quads

    def __iter__(self) -> Iterator[Quad]:
        with self._lock:
            return iter(sorted(self._quads, key=_quad_key))

    def quads(self) -> frozenset:
        with self._lock:
            return frozenset(self._quads)

    def graphs(self) -> set:
        with self._lock:
            return {q.graph for q in self._quads}

    def insert_quads(self, graph: Uri, triples: Iterable[Triple], **info) -> int:
        """Add admitted triples to ``graph``; returns how many were new."""
        if not isinstance(graph, Uri):
            raise StoreError(f"graph name must be a URI, got {graph}")
        batch = []
        for tr in triples:
            q = Quad(graph, tr)
            if not q.is_ground():
                raise StoreError(f"refusing non-ground quad {tr} in {graph}")
            try:
                check_triple(EMPTY_ENV, tr, self.ont)
            except TypeCheckError as exc:
                raise StoreError(f"ill-typed triple reached the store: {tr} ({exc.message})")
            batch.append(q)
        added = 0
        with self._lock:
            for q in batch:
                if q in self._quads:
                    continue
                self._quads.add(q)
                g, s, p, o = q.terms()
                for k in (("g", g), ("gs", g, s), ("gp", g, p), ("go", g, o),
                          ("s", s), ("p", p), ("o", o)):
                    self._index[k].add(q)
                added += 1
            if info:
                self.graph_info.setdefault(graph, {}).update(info)
        return added

    def candidates(self, g, s, p, o) -> set | frozenset:
        """Smallest indexed quad set that can contain matches of the pattern."""
        bound = {name: t for name, t in zip("gspo", (g, s, p, o)) if not isinstance(t, Var)}
        keys = []
        if "g" in bound:
            keys.append(("g", bound["g"]))
            for n in "spo":
                if n in bound:
                    keys.append(("g" + n, bound["g"], bound[n]))
        for n in "spo":
            if n in bound:
                keys.append((n, bound[n]))
        with self._lock:
            if not keys:
                return self._quads
            return min((self._index.get(k, ()) for k in keys), key=len)

    def dump(self) -> bytes:
        with self._lock:
            return serialize_nquads(self._quads)

    def load_dump(self, body: bytes | str) -> int:
        quads = parse_nquads(body)
        total = 0
        by_graph = defaultdict(list)
        for q in quads:
            by_graph[q.graph].append(q.triple)
        for g in sorted(by_graph, key=term_key):
            total += self.insert_quads(g, by_graph[g])
        return total


def _quad_key(q: Quad):
    return tuple(term_key(t) for t in q.terms())


# ---------------------------------------------------------------- matching

def _unify(pattern, quad_terms, mu: dict) -> dict | None:
    out = dict(mu)
    for pt, t in zip(pattern, quad_terms):
        if isinstance(pt, Var):
            seen = out.get(pt.name)
            if seen is None:
                out[pt.name] = t
            elif seen != t:
                return None
        elif pt != t:
            return None
    return out


def _apply(pattern, mu):
    return tuple(mu.get(t.name, t) if isinstance(t, Var) else t for t in pattern)


def match_bgp(store: QuadStore, patterns, base: Mapping = EMPTY_BINDING) -> SolutionSet:
    """All extensions of ``base`` that map every (g, s, p, o) pattern into the store.

    At each level the pattern with the fewest candidate quads is joined next.
    """
    patterns = [tuple(p) for p in patterns]
    results = []

    def solve(remaining, mu):
        if not remaining:
            results.append(Binding(mu))
            return
        applied = [(_apply(p, mu), i) for i, p in enumerate(remaining)]
        cands = [(store.candidates(*ap), ap, i) for ap, i in applied]
        cset, ap, i = min(cands, key=lambda c: (len(c[0]), c[2]))
        rest = remaining[:i] + remaining[i + 1:]
        for q in list(cset):
            nu = _unify(ap, q.terms(), mu)
            if nu is not None:
                solve(rest, nu)

    solve(patterns, dict(base))
    return SolutionSet(results)


def data_patterns(d: Data) -> list[tuple]:
    return [(g, *tr) for g, tr in d.quads()]


def _join(left: Iterable[Binding], right: Iterable[Binding]) -> list[Binding]:
    right = list(right)
    return [a.merge(b) for a in left for b in right if a.compatible(b)]


def _holds(mu, f, clock) -> bool:
    try:
        return eval_filter(mu, f, clock)
    except EvaluationError as exc:
        log.warning("filter error treated as false: %s", exc)
        return False


def eval_query(store: QuadStore, q, base: Mapping = EMPTY_BINDING,
               clock: Clock = system_clock) -> SolutionSet:
    """Solutions of ``q`` extending ``base``.

    In a conjunction the graph patterns are joined first and the filters are
    applied to the joined bindings.  A filter may only mention variables of
    ``base`` or of a graph pattern in the same conjunction.
    """
    base = base if isinstance(base, Binding) else Binding(base)
    return SolutionSet(_eval(store, q, base, clock))


def _eval(store, q, base: Binding, clock) -> list[Binding]:
    if isinstance(q, Union_):
        return _eval(store, q.left, base, clock) + _eval(store, q.right, base, clock)
    items = flatten_join(q) if isinstance(q, Join) else [q]
    filters = [i for i in items if is_filter(i)]
    data_items = [i for i in items if not is_filter(i)]
    scope = set(base)
    for i in data_items:
        scope |= data_vars(i)
    for f in filters:
        missing = query_vars(f) - scope
        if missing:
            raise QueryError("filter mentions variables bound by no graph pattern: "
                             + ", ".join("$" + v for v in sorted(missing)))
    sols = [base]
    # plain graph patterns go first as one combined pattern match
    patterns = [p for i in data_items if isinstance(i, Data) for p in data_patterns(i)]
    if patterns:
        sols = [nu for mu in sols for nu in match_bgp(store, patterns, mu)]
    for i in data_items:
        if not isinstance(i, Data):
            sols = [nu for mu in sols for nu in _eval(store, i, mu, clock)]
    return [mu for mu in sols if all(_holds(mu, f, clock) for f in filters)]


def entails(store: QuadStore, q, clock: Clock = system_clock) -> bool:
    """Whether a ground query is satisfied by the store."""
    if query_vars(q):
        raise QueryError(f"entails needs a ground query; free: {sorted(query_vars(q))}")
    return _entails(store, q, clock)


def _entails(store, q, clock):
    if isinstance(q, Data):
        return all(Quad(g, tr) in store for g, tr in q.quads())
    if isinstance(q, Join):
        return _entails(store, q.left, clock) and _entails(store, q.right, clock)
    if isinstance(q, Union_):
        return _entails(store, q.left, clock) or _entails(store, q.right, clock)
    return _holds(EMPTY_BINDING, q, clock)
