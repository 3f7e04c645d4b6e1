import logging
import math
import random
import threading
from datetime import datetime, timezone

import pytest

from helpers import (
    GRAPHS, haversine_cosines, oracle_solutions, random_ont, random_query, random_store,
)
from ldscript.evaluate import (
    EvaluationError, eval_expr, eval_filter, fixed_clock, haversine_km, lang_matches,
)
from ldscript.store import (
    Binding, QuadStore, QueryError, SolutionSet, StoreError, entails, eval_query, match_bgp,
)
from ldscript.syntax import (
    Abs, BinOp, Compare, Data, GraphPattern, Haversine, Join, LangMatches, Not, Now, Or,
    Regex, StrOf, Union_,
)
from ldscript.terms import DateTime, Dec, Int, Quad, Str, Triple, Uri, Var, parse_datetime
from ldscript.typesystem import DECIMAL, RES, STRING, Ontology, Property, check_triple, EMPTY_ENV

RES_NS = "http://dbpedia.org/resource/"
DBP = "http://dbpedia.org/property/"
RDFS = "http://www.w3.org/2000/01/rdf-schema#"
KAZ = Uri(RES_NS + "Kazakhstan")
CAPITAL = Uri(DBP + "capital")
LABEL = Uri(RDFS + "label")
COMMENT = Uri(RDFS + "comment")

logging.getLogger("ldscript.store").setLevel(logging.ERROR)


@pytest.fixture
def kaz_store():
    ont = Ontology({CAPITAL: Property(RES), LABEL: Property(STRING)})
    store = QuadStore(ont)
    store.insert_quads(KAZ, [Triple(KAZ, CAPITAL, Uri(RES_NS + "Astana")),
                             Triple(KAZ, LABEL, Str("Казахстан", "ru"))])
    return store


def gp(graph, *triples):
    return Data((GraphPattern(graph, tuple(Triple(*t) for t in triples)),))


# ---------------------------------------------------------------- store

def test_insert_is_set_union(kaz_store):
    t = Triple(KAZ, CAPITAL, Uri(RES_NS + "Astana"))
    assert kaz_store.insert_quads(KAZ, [t]) == 0
    assert kaz_store.insert_quads(Uri(RES_NS + "Other"), [t]) == 1
    assert len(kaz_store) == 3


def test_insert_rechecks_types(kaz_store):
    with pytest.raises(StoreError):
        kaz_store.insert_quads(KAZ, [Triple(KAZ, CAPITAL, Str("Astana"))])
    with pytest.raises(StoreError):
        kaz_store.insert_quads(KAZ, [Triple(Var("x"), CAPITAL, KAZ)])


def test_match_capital(kaz_store):
    sols = match_bgp(kaz_store, [(KAZ, KAZ, CAPITAL, Var("x"))])
    assert list(sols) == [Binding({"x": Uri(RES_NS + "Astana")})]
    assert len(match_bgp(QuadStore(), [(KAZ, KAZ, CAPITAL, Var("x"))])) == 0


def test_match_repeated_variable():
    p = Uri("http://a/p")
    store = QuadStore(Ontology({p: Property(RES)}))
    a, b = Uri("http://a/a"), Uri("http://a/b")
    store.insert_quads(a, [Triple(a, p, a), Triple(a, p, b)])
    sols = match_bgp(store, [(Var("g"), Var("x"), p, Var("x"))])
    assert list(sols) == [Binding({"g": a, "x": a})]


def test_dump_and_reload(kaz_store):
    other = QuadStore(kaz_store.ont)
    assert other.load_dump(kaz_store.dump()) == 2
    assert other.quads() == kaz_store.quads()


def test_solution_order_is_canonical():
    a = SolutionSet([Binding({"x": Int(2)}), Binding({"x": Int(1)}), Binding({"x": Int(1)})])
    assert [b["x"] for b in a] == [Int(1), Int(2)]


def test_concurrent_inserts_are_safe():
    p = Uri("http://a/p")
    store = QuadStore(Ontology({p: Property(DECIMAL)}))
    g = Uri("http://a/g")

    def work(k):
        store.insert_quads(g, [Triple(Uri(f"http://a/s{k}"), p, Int(i)) for i in range(50)])

    threads = [threading.Thread(target=work, args=(k,)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(store) == 400
    assert len(match_bgp(store, [(g, Var("s"), p, Int(7))])) == 8


# ---------------------------------------------------------------- evaluation

def test_str_and_abs():
    assert eval_expr({}, StrOf(Int(99))) == Str("99")
    assert eval_expr({}, StrOf(Uri(RES_NS + "Astana"))) == Str(RES_NS + "Astana")
    assert eval_expr({}, Abs(Int(-3))) == Int(3)
    assert eval_expr({}, Abs(Dec("-2.5"))) == Dec("2.5")


def test_arithmetic_is_exact():
    assert eval_expr({}, BinOp("+", Dec("0.1"), Dec("0.2"))) == Dec("0.3")
    assert eval_expr({}, BinOp("-", Int(5), Int(7))) == Int(-2)
    assert isinstance(eval_expr({}, BinOp("+", Int(1), Dec("1"))), Dec)


def test_unbound_variable_in_expression():
    with pytest.raises(EvaluationError):
        eval_expr({}, Var("x"))


def test_haversine():
    assert eval_expr({}, Haversine(Dec("43.25"), Dec("76.9"), Dec("43.25"), Dec("76.9"))) == Dec(0)
    got = eval_expr({}, Haversine(Dec("43.25"), Dec("76.90"), Dec("51.17"), Dec("71.43")))
    assert abs(float(got.value) - haversine_cosines(43.25, 76.90, 51.17, 71.43)) < 0.5


def test_haversine_against_law_of_cosines():
    rng = random.Random(7)
    for _ in range(500):
        lat1, lat2 = rng.uniform(-80, 80), rng.uniform(-80, 80)
        lon1, lon2 = rng.uniform(-180, 180), rng.uniform(-180, 180)
        assert math.isclose(haversine_km(lat1, lon1, lat2, lon2),
                            haversine_cosines(lat1, lon1, lat2, lon2), abs_tol=0.5)


def test_now_uses_injected_clock():
    at = datetime(2011, 6, 1, tzinfo=timezone.utc)
    assert eval_expr({}, Now(), fixed_clock(at)) == DateTime(at)


@pytest.mark.parametrize("tag,rng,expected", [
    ("en", "*", True),
    ("en-gb", "en", True),
    ("EN-GB", "en", True),
    ("en", "en-gb", False),
    ("eng", "en", False),
    ("ru", "en", False),
    (None, "*", False),
])
def test_lang_matches(tag, rng, expected):
    assert lang_matches(tag, rng) is expected


def test_filters():
    b = {"y": Str("workshop", "en-gb"), "n": Dec("5.94")}
    assert eval_filter(b, LangMatches(Var("y"), "en"))
    assert eval_filter({"y": Str("Kazakhstani", "en")}, LangMatches(Var("y"), "*"))
    assert eval_filter(b, Regex(Var("y"), "^work"))
    assert eval_filter(b, Compare("<", Var("n"), Int(100)))
    assert eval_filter({}, Compare("=", Int(15), Dec("15.0")))
    assert not eval_filter({}, Compare("=", Str("a", "en"), Str("a")))
    assert eval_filter({}, Compare("<", Str("a"), Str("b")))
    assert eval_filter(b, Or(Not(Regex(Var("y"), "x")), Regex(Var("y"), "y")))
    early = DateTime(parse_datetime("2011-01-01T12:00:00+06:00"))
    late = DateTime(parse_datetime("2011-01-01T07:00:00Z"))
    assert eval_filter({}, Compare("<", early, late))
    assert eval_filter({}, Compare("=", early, DateTime(parse_datetime("2011-01-01T06:00:00Z"))))
    with pytest.raises(EvaluationError):
        eval_filter({}, Compare("<", Int(1), Str("1")))


# ---------------------------------------------------------------- queries

def test_label_or_comment_union():
    dbp = Uri(DBP)
    ont = Ontology({LABEL: Property(STRING), COMMENT: Property(STRING)})
    store = QuadStore(ont)
    loc, pop = Uri(DBP + "location"), Uri(DBP + "population")
    store.insert_quads(dbp, [Triple(loc, LABEL, Str("location", "en")),
                             Triple(pop, COMMENT, Str("a location count", "en")),
                             Triple(pop, LABEL, Str("population", "en"))])
    p, y = Var("p"), Var("y")
    label = gp(dbp, (p, LABEL, y))
    comment = gp(dbp, (p, COMMENT, y))
    q = Join(Union_(label, comment), Regex(y, "location"))
    got = eval_query(store, q)
    assert {b["p"] for b in got} == {loc, pop}
    assert eval_query(store, Union_(label, label)) == eval_query(store, label)


def test_filter_scope_is_checked(kaz_store):
    with pytest.raises(QueryError):
        eval_query(kaz_store, Join(gp(KAZ, (KAZ, CAPITAL, Var("x"))), Regex(Var("z"), "a")))


def test_bare_filter_uses_supplied_binding(kaz_store):
    f = LangMatches(Var("y"), "ru")
    assert len(eval_query(kaz_store, f, {"y": Str("x", "ru")})) == 1
    assert len(eval_query(kaz_store, f, {"y": Str("x", "en")})) == 0


def test_entails(kaz_store):
    present = gp(KAZ, (KAZ, CAPITAL, Uri(RES_NS + "Astana")))
    absent = gp(KAZ, (KAZ, CAPITAL, Uri(RES_NS + "Almaty")))
    assert entails(kaz_store, present)
    assert not entails(kaz_store, absent)
    assert entails(kaz_store, Union_(absent, present))
    assert not entails(kaz_store, Join(absent, present))
    for q in (present, absent):
        assert entails(kaz_store, q) == (list(eval_query(kaz_store, q)) == [Binding()])
    with pytest.raises(QueryError):
        entails(kaz_store, gp(KAZ, (KAZ, CAPITAL, Var("x"))))


def test_query_matches_brute_force_small():
    rng = random.Random(99)
    for _ in range(40):
        ont = random_ont(rng)
        store = random_store(rng, ont, 30)
        q, vars_ = random_query(rng, rng.randint(1, 3))
        got = {frozenset(b.items()) for b in eval_query(store, q)}
        assert got == oracle_solutions(store, q, vars_)


def test_solutions_are_entailed_and_monotone():
    from ldscript.syntax import subst_query
    rng = random.Random(5)
    for _ in range(60):
        ont = random_ont(rng)
        small = random_store(rng, ont, 25)
        big = QuadStore(ont)
        big.load_dump(small.dump())
        extra = random_store(rng, ont, 25)
        for quad in extra.quads():
            big.insert_quads(quad.graph, [quad.triple])
        q, _ = random_query(rng, rng.randint(1, 3))
        sols = eval_query(small, q)
        for mu in sols:
            assert entails(small, subst_query(q, mu))
        assert sols.as_set() <= eval_query(big, q).as_set()


def test_store_stays_well_typed():
    rng = random.Random(3)
    for _ in range(20):
        ont = random_ont(rng)
        store = random_store(rng, ont)
        for quad in store.quads():
            check_triple(EMPTY_ENV, quad.triple, ont)
            assert quad.graph in GRAPHS
            assert isinstance(quad, Quad)
