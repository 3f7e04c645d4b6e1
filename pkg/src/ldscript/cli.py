"""Command line entry point: ``ldscript check | run | dump-store``."""
from __future__ import annotations

import argparse
import hashlib
import logging
import sys
import uuid
from pathlib import Path

from .checker import InferenceError, check_script, infer_select_types, needs_inference
from .deref import FetchConfig, FetchRegistry
from .evaluate import fixed_clock, system_clock
from .interpreter import Outcome, RunConfig, Strategy, new_state, run_script
from .parser import ScriptSyntaxError, parse_program
from .rdfio import RdfSyntaxError, parse_rdf
from .syntax import Iterate, Select, Unit
from .terms import TermError, parse_datetime
from .typesystem import Ontology, OntologyConflict, TypeCheckError, derive_ontology

log = logging.getLogger("ldscript")

EXIT_OK = 0
EXIT_TYPE = 1
EXIT_STUCK = 2
EXIT_FATAL = 3
EXIT_STEP_LIMIT = 4

_OUTCOME_EXIT = {
    Outcome.DONE: EXIT_OK,
    Outcome.STUCK: EXIT_STUCK,
    Outcome.FATAL: EXIT_FATAL,
    Outcome.STEP_LIMIT: EXIT_STEP_LIMIT,
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


def _diag(path, node_or_pos, message, severity="error") -> str:
    pos = node_or_pos if isinstance(node_or_pos, tuple) else getattr(node_or_pos, "pos", None)
    line, col = pos if pos else (1, 1)
    return f"{path}:{line}:{col}: {severity}: {message}"


def load_ontology(paths) -> Ontology:
    triples = []
    for p in paths or ():
        path = Path(p)
        try:
            body = path.read_bytes()
        except OSError as exc:
            raise CliError(f"{p}: cannot read ontology: {exc.strerror}", EXIT_FATAL) from None
        ctype = "application/n-triples" if path.suffix == ".nt" else "text/turtle"
        try:
            triples.extend(parse_rdf(body, ctype, base=path.resolve().as_uri()))
        except RdfSyntaxError as exc:
            raise CliError(_diag(p, (exc.line, exc.col), exc.message), EXIT_FATAL) from None
    try:
        return derive_ontology(triples)
    except OntologyConflict as exc:
        raise CliError(f"ontology: {exc}", EXIT_TYPE) from None


def load_checked(path: str, ont: Ontology, out=None):
    """Parse, infer missing annotations and check; returns (script, program, source)."""
    try:
        text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise CliError(f"{path}: cannot read script: {exc.strerror}", EXIT_FATAL) from None
    try:
        prog = parse_program(text)
    except ScriptSyntaxError as exc:
        raise CliError(_diag(path, (exc.line, exc.col), exc.message), EXIT_TYPE) from None
    script = prog.script
    try:
        if needs_inference(script):
            script = infer_select_types(script, ont)
            _report_inferred(path, prog.script, script, out or sys.stdout)
        check_script(script, ont)
    except (TypeCheckError, InferenceError) as exc:
        raise CliError(_diag(path, exc.node, exc.message), EXIT_TYPE) from None
    return script, prog, text


def _report_inferred(path, before, after, out):
    def selects(s):
        while not isinstance(s, Unit):
            if isinstance(s, Select):
                yield s
                s = s.rest
            elif isinstance(s, Iterate):
                s = s.body
            else:
                s = s.rest

    for old, new in zip(selects(before), selects(after)):
        if old.type is None:
            print(_diag(path, old, f"inferred ${new.var} : {new.type}", "note"), file=out)


def _build_config(args) -> RunConfig:
    clock = system_clock
    if args.fixed_clock:
        try:
            clock = fixed_clock(parse_datetime(args.fixed_clock))
        except (TermError, ValueError) as exc:
            raise CliError(f"--fixed-clock: {exc}", EXIT_FATAL) from None
    fetch = FetchConfig(fixture_dir=Path(args.fixtures) if args.fixtures else None,
                        max_redirects=args.max_redirects, timeout_ms=args.timeout_ms)
    return RunConfig(max_iterations=args.max_iterations, strategy=Strategy(args.select_strategy),
                     step_limit=args.step_limit, clock=clock, fetch=fetch,
                     strict_deref=args.strict_deref)


def _execute(args):
    ont = load_ontology(args.ontology)
    script, prog, text = load_checked(args.file, ont, out=sys.stderr)
    cfg = _build_config(args)
    if args.fixed_clock:
        run_id = hashlib.sha256((text + args.fixed_clock).encode()).hexdigest()[:12]
    else:
        run_id = uuid.uuid4().hex[:12]
    records = FetchRegistry(args.fetch_records) if args.fetch_records else None
    try:
        state = new_state(ont, cfg, records=records, run_id=run_id)
    except (OSError, ValueError) as exc:
        raise CliError(f"fixtures: {exc}", EXIT_FATAL) from None
    result = run_script(script, state, cfg)
    if records is not None:
        records.save()
    if args.trace:
        Path(args.trace).write_text(state.trace_text(), "utf-8")
    for w in state.warnings:
        print(f"{args.file}: warning: {w}", file=sys.stderr)
    if result.outcome is not Outcome.DONE:
        print(f"{args.file}: {result.outcome.value}: {result.message}", file=sys.stderr)
    return result, state


def cmd_check(args) -> int:
    ont = load_ontology(args.ontology)
    load_checked(args.file, ont)
    print(f"{args.file}: ok")
    return EXIT_OK


def cmd_run(args) -> int:
    result, state = _execute(args)
    if args.dump:
        Path(args.dump).write_bytes(state.store.dump())
    print(f"{result.outcome.value}: {state.steps} steps, {len(state.store)} quads "
          f"in {len(state.store.graphs())} graphs", file=sys.stderr)
    return _OUTCOME_EXIT[result.outcome]


def cmd_dump_store(args) -> int:
    result, state = _execute(args)
    data = state.store.dump()
    if args.output and args.output != "-":
        Path(args.output).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))
        sys.stdout.flush()
    return _OUTCOME_EXIT[result.outcome]


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--fixtures", metavar="DIR", help="replay HTTP from DIR/manifest.json instead of the network")
    p.add_argument("--max-iterations", type=int, default=100, metavar="N")
    p.add_argument("--select-strategy", choices=[s.value for s in Strategy], default="first")
    p.add_argument("--step-limit", type=int, default=100_000, metavar="N")
    p.add_argument("--trace", metavar="PATH", help="write one line per reduction")
    p.add_argument("--strict-deref", action="store_true",
                   help="a failed dereference aborts the run (exit 3)")
    p.add_argument("--fixed-clock", metavar="ISO", help="freeze now() at this dateTime")
    p.add_argument("--fetch-records", metavar="PATH",
                   help="JSON file remembering failed URIs across runs")
    p.add_argument("--max-redirects", type=int, default=5, metavar="N")
    p.add_argument("--timeout-ms", type=int, default=10_000, metavar="MS")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage, which would read as "stuck"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_FATAL, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ldscript", description="Typed Linked Data scripts.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("check", help="type-check a script")
    p.add_argument("file")
    p.add_argument("--ontology", action="append", default=[], metavar="TTL")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("run", help="run a script")
    p.add_argument("file")
    p.add_argument("--ontology", action="append", default=[], metavar="TTL")
    p.add_argument("--dump", metavar="OUT.nq", help="write the final store as N-Quads")
    _add_run_options(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("dump-store", help="run a script and print the store as N-Quads")
    p.add_argument("file")
    p.add_argument("--ontology", action="append", default=[], metavar="TTL")
    p.add_argument("-o", "--output", metavar="PATH", help="default: standard output")
    _add_run_options(p)
    p.set_defaults(func=cmd_dump_store)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        if getattr(args, "max_iterations", 1) < 1 or getattr(args, "step_limit", 1) < 1:
            raise CliError("--max-iterations and --step-limit must be >= 1", EXIT_FATAL)
        return args.func(args)
    except CliError as exc:
        print(str(exc), file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
