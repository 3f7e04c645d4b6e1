import logging
import random

import pytest

from helpers import (
    FIXTURES, ONTOLOGY, SCRIPTS, DictTransport, nt_body, subject_reduction_trial,
)
from ldscript.deref import FetchConfig, FixtureTransport
from ldscript.interpreter import (
    Outcome, RunConfig, Strategy, enumerate_bindings, new_state, run_iterate, run_script,
)
from ldscript.parser import parse_script
from ldscript.rdfio import parse_rdf
from ldscript.checker import infer_select_types
from ldscript.syntax import Data, GraphPattern
from ldscript.terms import Int, Str, Triple, Uri, Var
from ldscript.typesystem import (
    INTEGER, RES, STRING, Ontology, Property, Simple, TypeCheckError, derive_ontology,
)

EX = "http://example.org/"
XSD = "http://www.w3.org/2001/XMLSchema#"
P, L = Uri(EX + "p"), Uri(EX + "label")
A, B, C = (Uri(EX + n) for n in "abc")
ONT = Ontology({P: Property(RES), L: Property(STRING)})

logging.getLogger("ldscript").setLevel(logging.ERROR)


def run(src, docs, cfg=RunConfig(), ont=ONT):
    state = new_state(ont, cfg, DictTransport(docs), run_id="t")
    return run_script(parse_script(src), state, cfg)


def chain(n):
    """a0 -p-> a1 -p-> ... -p-> an, each document describing one link."""
    return {EX + f"a{i}": nt_body([(Uri(EX + f"a{i}"), P, Uri(EX + f"a{i + 1}"))])
            for i in range(n)}


def test_from_named_loads_graph():
    r = run(f"from named <{A.value}>", {A.value: nt_body([(A, P, B)])})
    assert r.outcome is Outcome.DONE
    assert [q.graph for q in r.state.store.quads()] == [A]
    assert r.state.records.get(A.value).succeeded


def test_stuck_where():
    r = run(f"from named <{A.value}> where {{ graph <{A.value}> {{ <{A.value}> <{P.value}> <{C.value}> }} }}",
            {A.value: nt_body([(A, P, B)])})
    assert r.outcome is Outcome.STUCK
    assert "Where" in r.message


def test_stuck_select_at_top_level():
    r = run(f"select $x : Res where {{ graph <{A.value}> {{ <{A.value}> <{P.value}> $x }} }}", {})
    assert r.outcome is Outcome.STUCK


def test_step_limit():
    src = f"from named <{A.value}> from named <{B.value}> from named <{C.value}>"
    r = run(src, {}, RunConfig(step_limit=2))
    assert r.outcome is Outcome.STEP_LIMIT
    assert r.state.steps == 2


def test_failed_fetch_continues_unless_strict():
    src = f"from named <{EX}offline>"
    assert run(src, {}).outcome is Outcome.DONE
    assert run(src, {}, RunConfig(strict_deref=True)).outcome is Outcome.FATAL


def test_first_versus_all():
    docs = {A.value: nt_body([(A, P, B), (A, P, C)]), B.value: b"", C.value: b""}
    src = f"""from named <{A.value}>
        select $x : Res where {{ graph <{A.value}> {{ <{A.value}> <{P.value}> $x }} }}
        from named $x"""
    first = run(src, docs)
    assert first.state.store.graphs() == {A}
    assert sum(l.split()[2] == "from-named" for l in first.state.trace) == 2
    every = run(src, docs, RunConfig(strategy=Strategy.ALL))
    assert sum(l.split()[2] == "from-named" for l in every.state.trace) == 3
    # the first binding in canonical order is b
    selects = [l for l in first.state.trace if " select " in l]
    assert selects == [f"STEP 2 select $x=<{B.value}>"]


def test_iterate_follows_chain():
    docs = chain(5)
    src = f"""from named <{EX}a0>
        iterate {{
          select $g : Res, $x : Res where {{ graph $g {{ $g <{P.value}> $x }} }}
          from named $x
        }}"""
    r = run(src, docs)
    assert r.outcome is Outcome.DONE
    assert {u.value for u in r.state.store.graphs()} == {EX + f"a{i}" for i in range(5)}
    ends = [l for l in r.state.trace if " iterate-end " in l]
    assert len(ends) == 1


def test_iterate_on_empty_store_runs_one_pass():
    r = run_iterate(parse_script(f"select $x : Res where {{ graph <{A.value}> {{ $x <{P.value}> $x }} }}"),
                    new_state(ONT, RunConfig(), DictTransport({})), RunConfig())
    assert r.outcome is Outcome.DONE
    assert r.state.trace[-1].endswith("passes=1")


def test_iterate_stops_at_fixpoint():
    state = new_state(ONT, RunConfig(), DictTransport({}))
    state.store.insert_quads(A, [Triple(A, P, B)])
    body = parse_script(f"select $x : Res where {{ graph <{A.value}> {{ <{A.value}> <{P.value}> $x }} }}")
    r = run_iterate(body, state, RunConfig())
    passes = [l for l in r.state.trace if "iterate-pass" in l]
    assert [l.split()[-1] for l in passes] == ["productive=yes", "productive=no"]


def test_max_iterations_warns():
    r = run(f"""from named <{EX}a0> iterate {{
          select $g : Res, $x : Res where {{ graph $g {{ $g <{P.value}> $x }} }}
          from named $x }}""", chain(10), RunConfig(max_iterations=3))
    assert r.outcome is Outcome.DONE
    assert r.state.warnings and "3 passes" in r.state.warnings[0]
    assert len(r.state.store.graphs()) < 10


def test_blocked_continuation_in_iterate_is_discarded():
    docs = {A.value: nt_body([(A, P, B), (A, P, C)])}
    src = f"""from named <{A.value}>
        iterate {{
          select $x : Res where {{ graph <{A.value}> {{ <{A.value}> <{P.value}> $x }} }}
          where {{ graph <{A.value}> {{ $x <{P.value}> $x }} }}
        }}"""
    r = run(src, docs)
    assert r.outcome is Outcome.DONE
    assert any(" discard " in l for l in r.state.trace)


def test_select_filters_bindings_by_type():
    ont = Ontology({P: Property(RES), Uri(EX + "n"): Property(INTEGER)})
    state = new_state(ont, RunConfig(), DictTransport({}))
    state.store.insert_quads(A, [Triple(A, P, B), Triple(A, P, Uri(EX + "n"))])
    q = Data((GraphPattern(A, (Triple(A, P, Var("x")),)),))
    got = enumerate_bindings([("x", Property(INTEGER))], q, state.store, ont)
    assert [b["x"] for b in got] == [Uri(EX + "n")]
    got = enumerate_bindings([("x", Simple(RES))], q, state.store, ont)
    assert len(got) == 2


def test_ill_typed_script_is_refused():
    src = f"select $x : xsd:string where {{ graph <{A.value}> {{ <{A.value}> <{P.value}> $x }} }}"
    with pytest.raises(TypeCheckError):
        run(src, {})


def test_russian_labels_iterate():
    state = new_state(ONT, RunConfig(), DictTransport({
        B.value: nt_body([(B, L, Str("бэ", "ru")), (C, L, Str("cee", "en"))])}))
    state.store.insert_quads(A, [Triple(B, L, Str("бэ", "ru")), Triple(A, L, Str("a", "en"))])
    src = (SCRIPTS / "russian_labels.lds").read_text().replace("rdfs:label", f"<{L.value}>")
    r = run_script(parse_script(src), state, RunConfig())
    assert r.outcome is Outcome.DONE
    assert state.store.graphs() == {A, B}
    assert state.records.get(A.value) is None


def test_capital_script_with_fixtures():
    ont = derive_ontology(parse_rdf(ONTOLOGY.read_bytes(), "text/turtle"))
    transport = FixtureTransport(FIXTURES)
    cfg = RunConfig(fetch=FetchConfig())
    state = new_state(ont, cfg, transport, run_id="t")
    s = infer_select_types(parse_script((SCRIPTS / "capital.lds").read_text()), ont)
    r = run_script(s, state, cfg)
    assert r.outcome is Outcome.DONE
    res = "http://dbpedia.org/resource/"
    assert state.store.graphs() == {Uri(res + "Kazakhstan"), Uri(res + "Astana")}


def test_subject_reduction_sample():
    rng = random.Random(17)
    cfg = RunConfig(step_limit=200, max_iterations=5)
    runs = 0
    while runs < 150:
        if subject_reduction_trial(rng, cfg) is not None:
            runs += 1


def test_literal_select_result_never_dereferenced():
    ont = Ontology({P: Property(RES), Uri(EX + "n"): Property(INTEGER)})
    state = new_state(ont, RunConfig(), DictTransport({}))
    state.store.insert_quads(A, [Triple(A, Uri(EX + "n"), Int(3))])
    src = f"select $v : xsd:integer where {{ graph <{A.value}> {{ <{A.value}> <{EX}n> $v }} }}"
    r = run_script(parse_script(src), state, RunConfig())
    assert r.outcome is Outcome.DONE
    assert r.state.trace[0] == f'STEP 1 select $v="3"^^<{XSD}integer>'
