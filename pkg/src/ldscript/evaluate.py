"""Evaluation of expressions and filters against a single binding.

Filters never look at the store; they only see the binding they are given.
"""
from __future__ import annotations

import math
from datetime import datetime, timezone
from decimal import Decimal
from typing import Callable, Mapping

from .regex import matches
from .syntax import (
    Abs, And, BinOp, Compare, Haversine, LangMatches, Not, Now, Or, Regex, StrOf,
)
from .terms import DateTime, Dec, Int, Str, Uri, Var, lexical_form

EARTH_RADIUS_KM = 6371.0

Clock = Callable[[], datetime]


class EvaluationError(Exception):
    """A runtime value did not have the shape its static type promised."""


def system_clock() -> datetime:
    return datetime.now(timezone.utc)


def fixed_clock(at: datetime) -> Clock:
    return lambda: at


def haversine_km(lat1: float, long1: float, lat2: float, long2: float) -> float:
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = phi2 - phi1
    dlam = math.radians(long2 - long1)
    a = math.sin(dphi / 2) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2) ** 2
    return 2 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(a)))


def _number(v, what) -> Decimal | int:
    if isinstance(v, (Int, Dec)):
        return v.value
    raise EvaluationError(f"{what} expects a number, got {v}")


def eval_expr(b: Mapping, e, clock: Clock = system_clock):
    if isinstance(e, Var):
        try:
            return b[e.name]
        except KeyError:
            raise EvaluationError(f"unbound variable ${e.name}") from None
    if isinstance(e, Now):
        return DateTime(clock())
    if isinstance(e, StrOf):
        return Str(lexical_form(eval_expr(b, e.arg, clock)))
    if isinstance(e, Abs):
        v = eval_expr(b, e.arg, clock)
        n = _number(v, "abs")
        return Int(abs(n)) if isinstance(v, Int) else Dec(abs(n))
    if isinstance(e, BinOp):
        x = eval_expr(b, e.left, clock)
        y = eval_expr(b, e.right, clock)
        a, c = _number(x, e.op), _number(y, e.op)
        r = a + c if e.op == "+" else a - c
        if isinstance(x, Int) and isinstance(y, Int):
            return Int(r)
        return Dec(Decimal(r))
    if isinstance(e, Haversine):
        vals = [float(_number(eval_expr(b, a, clock), "haversine")) for a in e.args]
        return Dec(Decimal(repr(haversine_km(*vals))))
    if isinstance(e, (Uri, Str, Int, Dec, DateTime)):
        return e
    raise EvaluationError(f"cannot evaluate {e!r}")


def lang_matches(tag: str | None, rng: str) -> bool:
    """Basic filtering: ``*`` matches any tag, otherwise equality or a ``-`` prefix."""
    if not tag:
        return False
    tag, rng = tag.lower(), rng.lower()
    if rng == "*":
        return True
    return tag == rng or tag.startswith(rng + "-")


def _values(x, y):
    if isinstance(x, (Int, Dec)) and isinstance(y, (Int, Dec)):
        return x.value, y.value
    if type(x) is not type(y):
        raise EvaluationError(f"cannot compare {x} with {y}")
    if isinstance(x, DateTime):
        return x.value.astimezone(timezone.utc), y.value.astimezone(timezone.utc)
    return x.value, y.value


def eval_filter(b: Mapping, f, clock: Clock = system_clock) -> bool:
    if isinstance(f, Regex):
        v = eval_expr(b, f.arg, clock)
        if not isinstance(v, Str):
            raise EvaluationError(f"regex expects a string, got {v}")
        return matches(v.value, f.pattern)
    if isinstance(f, LangMatches):
        v = eval_expr(b, f.arg, clock)
        if not isinstance(v, Str):
            raise EvaluationError(f"langMatches expects a string, got {v}")
        return lang_matches(v.lang, f.range)
    if isinstance(f, Compare):
        x = eval_expr(b, f.left, clock)
        y = eval_expr(b, f.right, clock)
        a, c = _values(x, y)
        if f.op == "=":
            return a == c and (not isinstance(x, Str) or x.lang == y.lang)
        return a < c
    if isinstance(f, And):
        return eval_filter(b, f.left, clock) and eval_filter(b, f.right, clock)
    if isinstance(f, Or):
        return eval_filter(b, f.left, clock) or eval_filter(b, f.right, clock)
    if isinstance(f, Not):
        return not eval_filter(b, f.arg, clock)
    raise EvaluationError(f"not a filter: {f!r}")
