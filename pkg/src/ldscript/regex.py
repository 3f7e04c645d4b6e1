"""The regular expression dialect accepted by ``regex(e, "...")``.

A conservative subset shared by XPath and Python regular expressions:

* literal characters, and ``\\`` followed by one of ``\\ . * + ? ( ) [ ] { } | ^ $ -``
  (also ``\\n``, ``\\t``, ``\\r``)
* ``.`` any character
* ``*``, ``+``, ``?`` applied to the preceding atom
* character classes ``[abc]``, ``[a-z]``, negated ``[^...]``
* anchors ``^`` and ``$``
* alternation ``|`` and grouping ``( ... )``

Anything else (counted repetition, backreferences, ``\\d``-style classes,
lookaround, inline flags) is rejected at parse time.  Matching is a search
over the whole lexical form, as with XPath ``fn:matches``.
"""
from __future__ import annotations

import functools
import re

_META_ESCAPES = set("\\.*+?()[]{}|^$-")
_CONTROL_ESCAPES = {"n": "\n", "t": "\t", "r": "\r"}


class RegexSyntaxError(ValueError):
    def __init__(self, pattern: str, index: int, message: str):
        super().__init__(f"{message} at offset {index} in regex {pattern!r}")
        self.pattern = pattern
        self.index = index


def validate(pattern: str) -> None:
    i, n = 0, len(pattern)
    depth = 0
    can_quantify = False
    while i < n:
        c = pattern[i]
        if c == "\\":
            if i + 1 >= n:
                raise RegexSyntaxError(pattern, i, "dangling backslash")
            e = pattern[i + 1]
            if e not in _META_ESCAPES and e not in _CONTROL_ESCAPES:
                raise RegexSyntaxError(pattern, i, f"unsupported escape \\{e}")
            i += 2
            can_quantify = True
        elif c == "[":
            i = _class_end(pattern, i)
            can_quantify = True
        elif c in "*+?":
            if not can_quantify:
                raise RegexSyntaxError(pattern, i, f"nothing to repeat before {c!r}")
            i += 1
            can_quantify = False
        elif c == "(":
            if pattern.startswith("(?", i):
                raise RegexSyntaxError(pattern, i, "group extensions are not supported")
            depth += 1
            i += 1
            can_quantify = False
        elif c == ")":
            if depth == 0:
                raise RegexSyntaxError(pattern, i, "unbalanced ')'")
            depth -= 1
            i += 1
            can_quantify = True
        elif c in "{}":
            raise RegexSyntaxError(pattern, i, "counted repetition is not supported")
        elif c == "]":
            raise RegexSyntaxError(pattern, i, "unbalanced ']'")
        elif c in "|^$":
            i += 1
            can_quantify = False
        else:
            i += 1
            can_quantify = True
    if depth:
        raise RegexSyntaxError(pattern, n, "unbalanced '('")


def _class_end(pattern: str, start: int) -> int:
    i = start + 1
    if i < len(pattern) and pattern[i] == "^":
        i += 1
    first = True
    while i < len(pattern):
        c = pattern[i]
        if c == "]" and not first:
            return i + 1
        if c == "\\":
            if i + 1 >= len(pattern):
                break
            e = pattern[i + 1]
            if e not in _META_ESCAPES and e not in _CONTROL_ESCAPES:
                raise RegexSyntaxError(pattern, i, f"unsupported escape \\{e}")
            i += 2
        elif c == "[":
            raise RegexSyntaxError(pattern, i, "nested character class")
        else:
            i += 1
        first = False
    raise RegexSyntaxError(pattern, start, "unterminated character class")


@functools.lru_cache(maxsize=512)
def compile_pattern(pattern: str) -> re.Pattern:
    validate(pattern)
    return re.compile(pattern)


def matches(text: str, pattern: str) -> bool:
    return compile_pattern(pattern).search(text) is not None
