"""Random generators and brute-force oracles shared by the property tests."""
from __future__ import annotations

import itertools
import random
from dataclasses import replace
from decimal import Decimal
from pathlib import Path

from ldscript.deref import DereferenceError, Failure, FailureKind, Response
from ldscript.evaluate import EvaluationError, eval_filter
from ldscript.store import QuadStore
from ldscript.syntax import (
    And, Compare, Data, FromNamed, GraphPattern, Iterate, Join, LangMatches, Not,
    Or, Regex, Select, Union_, Unit, Where,
)
from ldscript.terms import DateTime, Dec, Int, Quad, Str, Triple, Uri, Var, nt_term, parse_datetime
from ldscript.typesystem import (
    EMPTY_ENV, UNIVERSE, Ontology, Property, Simple, SimpleType, TypeCheckError,
    admit_triples, greatest, subtype, term_type,
)
from ldscript.checker import check_script

ROOT = Path(__file__).resolve().parent.parent
SCRIPTS = ROOT / "scripts"
FIXTURES = ROOT / "fixtures" / "kazakhstan"
ONTOLOGY = SCRIPTS / "ontology.ttl"

EX = "http://example.org/"
URIS = [Uri(EX + n) for n in ("a", "b", "c")]
GRAPHS = [Uri(EX + "g1"), Uri(EX + "g2")]
PROPS = [Uri(EX + n) for n in ("p", "q", "r")]
LITERALS = [Str("x"), Str("y", "en"), Int(1), Dec("1.5"),
            DateTime(parse_datetime("2020-01-01T00:00:00Z"))]
VARS = ["v", "w", "x", "y"]


def random_ont(rng: random.Random) -> Ontology:
    entries = {}
    for p in PROPS:
        choice = rng.choice(list(SimpleType) + [None])
        if choice is not None:
            entries[p] = Property(choice)
    return Ontology(entries)


def full_ont(rng: random.Random) -> Ontology:
    return Ontology({p: Property(rng.choice(list(SimpleType))) for p in PROPS})


def random_triples(rng: random.Random, n: int, subjects=None):
    subjects = subjects or URIS
    objects = URIS + PROPS + LITERALS
    return [Triple(rng.choice(subjects), rng.choice(PROPS), rng.choice(objects))
            for _ in range(n)]


def random_store(rng: random.Random, ont, max_quads: int = 50) -> QuadStore:
    store = QuadStore(ont)
    target = rng.randint(0, max_quads)
    tries = 0
    while len(store) < target and tries < 10 * max_quads:
        tries += 1
        admitted, _ = admit_triples(random_triples(rng, 1), ont)
        store.insert_quads(rng.choice(GRAPHS), admitted)
    return store


# ---------------------------------------------------------------- queries

# preferred positions per variable; other positions are used now and then
ROLES = {"v": "res", "w": "res", "x": "prop", "y": "lit"}
_SLOTS = {"res": ("g", "s", "o"), "prop": ("p",), "lit": ("o",)}


def _pick(rng, vars_, slot, pool, range_=None):
    fits = [v for v in vars_ if slot in _SLOTS[ROLES.get(v, "res")]]
    if range_ is not None:
        fits = [v for v in fits if (ROLES.get(v, "res") == "res") == (range_ == SimpleType.RESOURCE)]
    if rng.random() < 0.08 and vars_:
        return Var(rng.choice(vars_))
    if fits and rng.random() < 0.5:
        return Var(rng.choice(fits))
    return rng.choice(pool)


def _objects_for(p, ont):
    """Constant objects; with an ontology, only those the predicate accepts."""
    if ont is None or isinstance(p, Var) or p not in ont:
        return URIS + LITERALS
    want = ont[p].of
    return [t for t in URIS + PROPS + LITERALS
            if subtype(term_type(EMPTY_ENV, t, ont), Simple(want))]


def _triple(rng, vars_, ont, forced=None):
    if forced is not None:
        slot = rng.choice(_SLOTS[ROLES.get(forced, "res")])
        slot = "s" if slot == "g" else slot
    s = Var(forced) if forced and slot == "s" else _pick(rng, vars_, "s", URIS)
    p = Var(forced) if forced and slot == "p" else _pick(rng, vars_, "p", PROPS)
    if isinstance(p, Var) and not forced:
        return Triple(s, p, rng.choice(URIS))
    range_ = ont[p].of if ont is not None and p in ont else None
    o = Var(forced) if forced and slot == "o" else _pick(rng, vars_, "o", _objects_for(p, ont), range_)
    return Triple(s, p, o)


def random_data(rng, vars_, n_triples=None, ont=None):
    """A graph block that mentions every variable in ``vars_``."""
    n = n_triples or rng.randint(1, 3)
    triples = [_triple(rng, vars_, ont) for _ in range(n)]
    graph = _pick(rng, vars_, "g", GRAPHS)
    for v in [v for v in vars_ if v not in _vars_of(graph, triples)]:
        triples.append(_triple(rng, vars_, ont, forced=v))
    return Data((GraphPattern(graph, tuple(triples)),))


def _vars_of(graph, triples):
    return {t.name for t in (graph, *(x for tr in triples for x in tr)) if isinstance(t, Var)}


def random_filter(rng, vars_, depth=0):
    r = rng.random()
    if depth < 2 and r < 0.25:
        op = rng.choice([And, Or])
        return op(random_filter(rng, vars_, depth + 1), random_filter(rng, vars_, depth + 1))
    if depth < 2 and r < 0.35:
        return Not(random_filter(rng, vars_, depth + 1))
    v = Var(rng.choice(vars_))
    kind = rng.random()
    if kind < 0.2:
        return Regex(v, rng.choice(["x", "^y$", "[a-z]", "b"]))
    if kind < 0.4:
        return LangMatches(v, rng.choice(["*", "en", "EN-gb"]))
    other = Var(rng.choice(vars_)) if rng.random() < 0.4 else rng.choice(LITERALS + URIS)
    return Compare(rng.choice(["=", "<"]), v, other)


def random_query(rng, n_vars=None):
    """Query over at most four variables; union branches share their variables."""
    n_vars = rng.randint(1, 4) if n_vars is None else n_vars
    vars_ = VARS[:n_vars]
    shape = rng.random()
    if shape < 0.3:
        q = random_data(rng, vars_)
    elif shape < 0.6:
        k = rng.randint(1, len(vars_))
        q = Join(random_data(rng, vars_[:k]), random_data(rng, vars_[k - 1:]))
    else:
        q = Union_(random_data(rng, vars_), random_data(rng, vars_))
        if rng.random() < 0.5:
            q = Join(q, random_data(rng, vars_[:1]))
    if rng.random() < 0.5:
        q = Join(q, random_filter(rng, vars_))
    return q, vars_


def _inst(t, mu):
    return mu.get(t.name) if isinstance(t, Var) else t


def _oracle_holds(quads, q, mu) -> bool:
    if isinstance(q, Data):
        return all(Quad(_inst(g, mu), Triple(*(_inst(x, mu) for x in tr))) in quads
                   for g, tr in q.quads())
    if isinstance(q, Join):
        return _oracle_holds(quads, q.left, mu) and _oracle_holds(quads, q.right, mu)
    if isinstance(q, Union_):
        return _oracle_holds(quads, q.left, mu) or _oracle_holds(quads, q.right, mu)
    try:
        return eval_filter(mu, q)
    except EvaluationError:
        return False


def oracle_solutions(store: QuadStore, q, vars_) -> set:
    """Every total assignment over the store's terms whose instance holds."""
    quads = set(store.quads())
    domain = sorted({t for quad in quads for t in quad.terms()}, key=nt_term)
    out = set()
    for combo in itertools.product(domain, repeat=len(vars_)):
        mu = dict(zip(vars_, combo))
        if _oracle_holds(quads, q, mu):
            out.add(frozenset(mu.items()))
    return out


# ---------------------------------------------------------------- scripts

def random_script(rng: random.Random, depth: int = 0, bound=(), max_depth: int = 5, ont=None):
    """Unannotated script; selects introduce fresh variables used by their where."""
    if depth >= max_depth or rng.random() < 0.15:
        return Unit()
    r = rng.random()
    bound = list(bound)
    if r < 0.2:
        pool = URIS + [Var(v) for v in bound]
        return FromNamed(rng.choice(pool), random_script(rng, depth + 1, bound, max_depth, ont))
    if r < 0.75:
        fresh = [v for v in VARS if v not in bound]
        if not fresh:
            return Unit()
        group = rng.sample(fresh, rng.randint(1, min(2, len(fresh))))
        scope = bound + group
        q = random_data(rng, group, ont=ont)
        if rng.random() < 0.3:
            q = Union_(q, random_data(rng, group, ont=ont))
        if rng.random() < 0.4:
            q = Join(q, random_filter(rng, scope))
        rest = random_script(rng, depth + 1, scope, max_depth, ont)
        s = Where(q, rest)
        for v in reversed(group):
            s = Select(v, None, s)
        return s
    if r < 0.85 and bound:
        return Where(random_data(rng, rng.sample(bound, 1), ont=ont),
                     random_script(rng, depth + 1, bound, max_depth, ont))
    return Iterate(random_script(rng, depth + 1, bound, max_depth, ont))


def selects_of(s):
    out = []
    while not isinstance(s, Unit):
        if isinstance(s, Select):
            out.append(s)
            s = s.rest
        elif isinstance(s, Iterate):
            s = s.body
        else:
            s = s.rest
    return out


def annotate(s, types):
    it = iter(types)

    def go(s):
        if isinstance(s, Unit):
            return s
        if isinstance(s, Select):
            return replace(s, type=next(it), rest=go(s.rest))
        if isinstance(s, Iterate):
            return replace(s, body=go(s.body))
        return replace(s, rest=go(s.rest))

    return go(s)


def well_typed(s, ont) -> bool:
    try:
        check_script(s, ont)
    except TypeCheckError:
        return False
    return True


def oracle_inference(s, ont):
    """Brute force over every annotation vector; None means inference must fail."""
    k = len(selects_of(s))
    valid = [ts for ts in itertools.product(UNIVERSE, repeat=k) if well_typed(annotate(s, ts), ont)]
    chosen = []
    for i in range(k):
        top = greatest({ts[i] for ts in valid})
        if top is None:
            return None
        chosen.append(top)
    result = annotate(s, chosen)
    return result if well_typed(result, ont) else None


# ---------------------------------------------------------------- transports

class DictTransport:
    """In-memory transport: URI -> N-Triples body, anything else is a 404."""

    def __init__(self, docs: dict):
        self.docs = docs
        self.access_log = []

    def get(self, uri, accept, timeout_s):
        self.access_log.append(uri)
        if uri in self.docs:
            return Response(200, "application/n-triples", None, self.docs[uri])
        if uri.endswith("/offline"):
            raise DereferenceError(Failure(FailureKind.NETWORK, uri))
        return Response(404)


def nt_body(triples) -> bytes:
    return "".join(f"{nt_term(a)} {nt_term(b)} {nt_term(c)} .\n" for a, b, c in triples).encode()


def random_docs(rng, n_per_doc=6):
    docs = {}
    for u in URIS:
        if rng.random() < 0.8:
            subjects = URIS if rng.random() < 0.5 else [u]
            docs[u.value] = nt_body(random_triples(rng, rng.randint(0, n_per_doc), subjects))
    return docs


def haversine_cosines(lat1, lon1, lat2, lon2, radius=6371.0) -> float:
    """Great-circle distance by the spherical law of cosines (independent oracle)."""
    import math
    p1, p2 = math.radians(lat1), math.radians(lat2)
    dl = math.radians(lon2 - lon1)
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(dl)
    return radius * math.acos(max(-1.0, min(1.0, c)))


def decimal(x) -> Dec:
    return Dec(Decimal(str(x)))



_ROLE_POOL = {"res": URIS, "prop": PROPS, "lit": LITERALS}


def _data_blocks(s):
    def from_query(q):
        if isinstance(q, Data):
            yield q
        elif isinstance(q, (Join, Union_)):
            yield from from_query(q.left)
            yield from from_query(q.right)

    while not isinstance(s, Unit):
        if isinstance(s, Where):
            yield from from_query(s.query)
        s = s.body if isinstance(s, Iterate) else s.rest


def plant(rng, script, store: QuadStore, rounds: int = 3) -> None:
    """Insert admitted instances of the script's graph patterns so selects can fire."""
    for d in _data_blocks(script):
        for _ in range(rounds):
            mu = {v: rng.choice(_ROLE_POOL[ROLES.get(v, "res")]) for v in VARS}
            for g, tr in d.quads():
                g = _inst(g, mu)
                if not isinstance(g, Uri):
                    continue
                admitted, _ = admit_triples([Triple(*(_inst(x, mu) for x in tr))], store.ont)
                store.insert_quads(g, admitted)


def subject_reduction_trial(rng, cfg) -> int | None:
    """Run one random well-typed system, checking it after every step.

    Returns the number of steps taken, or None when no well-typed script came up.
    """
    from ldscript.checker import InferenceError, infer_select_types
    from ldscript.interpreter import check_system, new_state, run_script
    ont = full_ont(rng)
    s = random_script(rng, max_depth=4, ont=ont)
    if not selects_of(s):
        return None
    try:
        s = infer_select_types(s, ont)
    except InferenceError:
        return None
    state = new_state(ont, cfg, DictTransport(random_docs(rng)), run_id="sr")
    plant(rng, s, state.store)
    check_system(state)
    run_script(s, state, cfg, on_step=check_system)
    return state.steps
