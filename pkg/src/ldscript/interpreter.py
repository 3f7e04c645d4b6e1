"""Small-step execution of checked scripts.

A running system is a list of continuations (scripts running in parallel)
next to the store.  Each step applies one reduction to the first
continuation that can move:

* ``from named u s``   dereferences ``u`` into graph ``u``, then continues with ``s``;
* ``select ... where q s`` picks solutions of ``q`` whose terms dynamically
  have the declared types and substitutes them into ``where q s``;
* ``where q s`` with ``q`` ground continues with ``s`` once the store entails ``q``;
* an empty script is removed.

``iterate { body }`` runs ``body`` in passes.  Inside a pass every select
forks one continuation per solution it has not consumed before, and a pass
that consumed nothing new ends the iteration.  A blocked continuation inside
a pass is dropped once nothing else in the system can move; a blocked
continuation outside any iterate makes the run stuck.
"""
from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping

from .checker import check_script
from .deref import (
    FetchConfig, FetchRegistry, LoadKind, Transport, load_named, make_transport,
)
from .evaluate import Clock, system_clock
from .rdfio import SkolemMinter
from .store import Binding, QuadStore, SolutionSet, entails, eval_query
from .syntax import (
    FromNamed, Iterate, Select, Unit, Where, select_group, subst_script,
)
from .terms import Uri, nt_term
from .typesystem import EMPTY_ENV, TypeCheckError, check_triple, has_type

log = logging.getLogger(__name__)


class Strategy(enum.Enum):
    FIRST = "first"
    ALL = "all"


class Outcome(enum.Enum):
    DONE = "done"
    STUCK = "stuck"
    STEP_LIMIT = "step-limit"
    FATAL = "fatal"


class StepResult(enum.Enum):
    STEPPED = "stepped"
    DONE = "done"
    STUCK = "stuck"


class DereferenceFatal(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    max_iterations: int = 100
    strategy: Strategy = Strategy.FIRST
    step_limit: int = 100_000
    clock: Clock = system_clock
    fetch: FetchConfig = field(default_factory=FetchConfig)
    strict_deref: bool = False

    def __post_init__(self):
        if self.max_iterations < 1 or self.step_limit < 1:
            raise ValueError("max_iterations and step_limit must be >= 1")


@dataclass(eq=False)
class Frame:
    """Bookkeeping for one running ``iterate`` block."""

    id: int
    body: object
    parent: "Frame | None"
    depth: int
    consumed: set = field(default_factory=set)
    passes: int = 1
    productive: bool = False
    live: int = 0


@dataclass(eq=False)
class Continuation:
    script: object
    frame: Frame | None = None


class SystemState:
    def __init__(self, store: QuadStore, records: FetchRegistry | None = None,
                 transport: Transport | None = None, mint: Callable[[], Uri] | None = None):
        self.store = store
        self.records = records if records is not None else FetchRegistry()
        self.transport = transport
        self.mint = mint or SkolemMinter()
        self.continuations: list[Continuation] = []
        self.frames: list[Frame] = []
        self.trace: list[str] = []
        self.steps = 0
        self.warnings: list[str] = []
        self._frame_ids = itertools.count(1)

    @property
    def ont(self):
        return self.store.ont

    def spawn(self, script, frame: Frame | None = None, at: int | None = None) -> Continuation:
        c = Continuation(script, frame)
        if at is None:
            self.continuations.append(c)
        else:
            self.continuations.insert(at, c)
        if frame is not None:
            frame.live += 1
        return c

    def log(self, rule: str, detail: str) -> None:
        self.trace.append(f"STEP {self.steps} {rule} {detail}".rstrip())

    def trace_text(self) -> str:
        return "".join(line + "\n" for line in self.trace)


def _fmt_binding(b: Mapping) -> str:
    return " ".join(f"${k}={nt_term(v)}" for k, v in sorted(b.items()))


# ---------------------------------------------------------------- bindings

def enumerate_bindings(group, q, store: QuadStore, ont: Mapping,
                       clock: Clock = system_clock) -> SolutionSet:
    """Solutions of ``q`` restricted to the group variables that pass the type check."""
    names = [v for v, _ in group]
    out = []
    for mu in eval_query(store, q, clock=clock):
        b = Binding({n: mu[n] for n in names if n in mu})
        if len(b) != len(names):
            continue
        bad = [(n, t) for n, t in group if not has_type(EMPTY_ENV, b[n], t, ont)]
        if bad:
            n, t = bad[0]
            log.warning("select: %s is not of type %s; binding skipped", nt_term(b[n]), t)
            continue
        out.append(b)
    return SolutionSet(out)


# ---------------------------------------------------------------- stepping

def _finish(state: SystemState, cont: Continuation, cfg: RunConfig) -> None:
    state.continuations.remove(cont)
    if cont.frame is not None:
        _release(state, cont.frame, cfg)


def _release(state: SystemState, frame: Frame, cfg: RunConfig) -> None:
    frame.live -= 1
    if frame.live > 0:
        return
    state.log("iterate-pass", f"frame={frame.id} pass={frame.passes} "
                              f"productive={'yes' if frame.productive else 'no'}")
    if frame.productive and frame.passes < cfg.max_iterations:
        frame.passes += 1
        frame.productive = False
        state.spawn(frame.body, frame)
        return
    if frame.productive:
        msg = f"iterate frame {frame.id} stopped after {cfg.max_iterations} passes"
        log.warning(msg)
        state.warnings.append(msg)
    state.log("iterate-end", f"frame={frame.id} passes={frame.passes}")
    state.frames.remove(frame)
    if frame.parent is not None:
        _release(state, frame.parent, cfg)


def _try_step(state: SystemState, cont: Continuation, cfg: RunConfig) -> bool:
    s = cont.script
    if isinstance(s, Unit):
        state.log("unit", "")
        _finish(state, cont, cfg)
        return True
    if isinstance(s, FromNamed):
        if not isinstance(s.term, Uri):
            raise TypeCheckError(f"from named reached a non-URI term {s.term}", node=s)
        status = load_named(state.store, s.term, state.ont, state.records, cfg.fetch,
                            state.transport, state.mint)
        state.log("from-named", f"{nt_term(s.term)} {status}")
        if status.kind is LoadKind.FAILED and cfg.strict_deref:
            raise DereferenceFatal(f"cannot dereference {s.term.value}: {status.reason}")
        cont.script = s.rest
        return True
    if isinstance(s, Where):
        if not entails(state.store, s.query, cfg.clock):
            return False
        state.log("where", "")
        cont.script = s.rest
        return True
    if isinstance(s, Iterate):
        parent = cont.frame
        frame = Frame(next(state._frame_ids), s.body, parent,
                      parent.depth + 1 if parent else 0)
        state.frames.append(frame)
        if parent is not None:
            parent.live += 1
        i = state.continuations.index(cont)
        state.log("iterate", f"frame={frame.id}")
        state.spawn(s.body, frame, at=i + 1)
        _finish(state, cont, cfg)
        return True
    if isinstance(s, Select):
        return _step_select(state, cont, cfg)
    raise TypeError(f"not a script: {s!r}")


def _step_select(state, cont, cfg) -> bool:
    s = cont.script
    group, after = select_group(s)
    sols = enumerate_bindings(group, after.query, state.store, state.ont, cfg.clock)
    frame = cont.frame
    if frame is not None:
        fresh = [b for b in sols if (s, b) not in frame.consumed]
        if not fresh:
            state.log("select", f"exhausted ({len(sols)} seen)")
            _finish(state, cont, cfg)
            return True
        frame.consumed.update((s, b) for b in fresh)
        frame.productive = True
        chosen = fresh
    else:
        if not sols:
            return False
        chosen = sols[:1] if cfg.strategy is Strategy.FIRST else list(sols)
    i = state.continuations.index(cont)
    state.continuations.pop(i)
    for k, b in enumerate(chosen):
        state.log("select", _fmt_binding(b))
        state.continuations.insert(i + k, Continuation(subst_script(after, b), frame))
    if frame is not None:
        frame.live += len(chosen) - 1
    return True


def step(state: SystemState, cfg: RunConfig) -> StepResult:
    if not state.continuations:
        return StepResult.DONE
    state.steps += 1
    for cont in list(state.continuations):
        if _try_step(state, cont, cfg):
            return StepResult.STEPPED
    framed = [c for c in state.continuations if c.frame is not None]
    if framed:
        deepest = max(c.frame.depth for c in framed)
        for c in framed:
            if c.frame.depth == deepest:
                state.log("discard", "blocked inside iterate")
                _finish(state, c, cfg)
        return StepResult.STEPPED
    state.steps -= 1
    return StepResult.STUCK


# ---------------------------------------------------------------- runs

@dataclass
class RunResult:
    outcome: Outcome
    state: SystemState
    message: str = ""


def check_system(state: SystemState) -> None:
    """Raise TypeCheckError unless the store and every continuation are well typed."""
    for q in state.store.quads():
        check_triple(EMPTY_ENV, q.triple, state.ont)
    for c in state.continuations:
        check_script(c.script, state.ont)
    for f in state.frames:
        check_script(f.body, state.ont)


def new_state(ont: Mapping, cfg: RunConfig, transport: Transport | None = None,
              records: FetchRegistry | None = None, run_id: str | None = None) -> SystemState:
    return SystemState(QuadStore(ont), records,
                       transport if transport is not None else make_transport(cfg.fetch),
                       SkolemMinter(run_id))


def run_script(s, state: SystemState, cfg: RunConfig,
               on_step: Callable[[SystemState], None] | None = None) -> RunResult:
    """Run ``s`` to completion.  Ill-typed scripts are refused with TypeCheckError."""
    check_script(s, state.ont)
    state.spawn(s)
    while True:
        if state.steps >= cfg.step_limit and state.continuations:
            return RunResult(Outcome.STEP_LIMIT, state, f"step limit {cfg.step_limit} reached")
        try:
            r = step(state, cfg)
        except DereferenceFatal as exc:
            return RunResult(Outcome.FATAL, state, str(exc))
        if r is StepResult.DONE:
            return RunResult(Outcome.DONE, state)
        if r is StepResult.STUCK:
            blocked = state.continuations[0].script
            return RunResult(Outcome.STUCK, state, f"stuck: no reduction applies to {type(blocked).__name__}"
                             + (f" at {blocked.pos[0]}:{blocked.pos[1]}" if blocked.pos else ""))
        if on_step is not None:
            on_step(state)


def run_iterate(body, state: SystemState, cfg: RunConfig) -> RunResult:
    return run_script(Iterate(body), state, cfg)
