"""Typed scripts that crawl Linked Data into a local quad store."""
from .checker import (
    InferenceError, check_filter, check_query, check_script, infer_select_types,
    is_well_typed, type_expr,
)
from .deref import (
    FetchConfig, FetchRegistry, FixtureTransport, HttpTransport, LoadKind, LoadStatus,
    dereference, load_many, load_named,
)
from .evaluate import EvaluationError, eval_expr, eval_filter, fixed_clock
from .interpreter import (
    Outcome, RunConfig, Strategy, SystemState, enumerate_bindings, new_state,
    run_iterate, run_script, step,
)
from .parser import ScriptSyntaxError, parse_program, parse_script
from .rdfio import RdfSyntaxError, SkolemMinter, parse_nquads, parse_rdf, serialize_nquads
from .store import Binding, QuadStore, QueryError, SolutionSet, entails, eval_query, match_bgp
from .syntax import print_script
from .terms import DateTime, Dec, Int, Quad, Str, Triple, Uri, Var
from .typesystem import (
    Ontology, OntologyConflict, Property, Simple, SimpleType, TypeCheckError,
    admit_triples, check_triple, derive_ontology, subtype,
)

__all__ = [
    "admit_triples", "Binding", "check_filter", "check_query", "check_script",
    "check_triple", "DateTime", "Dec", "dereference", "derive_ontology", "entails",
    "enumerate_bindings", "eval_expr", "eval_filter", "eval_query", "EvaluationError",
    "FetchConfig", "FetchRegistry", "fixed_clock", "FixtureTransport", "HttpTransport",
    "infer_select_types", "InferenceError", "Int", "is_well_typed", "load_many",
    "load_named", "LoadKind", "LoadStatus", "match_bgp", "new_state", "Ontology",
    "OntologyConflict", "Outcome", "parse_nquads", "parse_program", "parse_rdf",
    "parse_script", "print_script", "Property", "Quad", "QuadStore", "QueryError",
    "RdfSyntaxError", "run_iterate", "run_script", "RunConfig", "ScriptSyntaxError",
    "serialize_nquads", "Simple", "SimpleType", "SkolemMinter", "SolutionSet", "step",
    "Str", "Strategy", "subtype", "SystemState", "Triple", "type_expr", "TypeCheckError",
    "Uri", "Var",
]

__version__ = "0.1.0"
