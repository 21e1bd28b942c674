"""Sequential object specifications.

A :class:`SequentialType` describes an object by its sequential behaviour only:
an initial state, a total update transition and a query evaluation.  States
must be hashable values (the checker memoizes on them); the shipped types use
``frozenset``, ``int`` and ``str``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import reduce
from typing import Any, Callable, Hashable, Iterable, Sequence

State = Hashable
Value = Any


class AdtError(ValueError):
    """Raised for malformed op text or an unusable type definition."""


# --- operations -------------------------------------------------------------


@dataclass(frozen=True)
class Insert:
    x: int

    def __str__(self):
        return f"I({self.x})"


@dataclass(frozen=True)
class Delete:
    x: int

    def __str__(self):
        return f"D({self.x})"


@dataclass(frozen=True)
class SetRead:
    def __str__(self):
        return "R"


@dataclass(frozen=True)
class Increment:
    d: int

    def __str__(self):
        return f"INC({self.d})"


@dataclass(frozen=True)
class Write:
    v: str

    def __str__(self):
        return f"W({self.v})"


@dataclass(frozen=True)
class Read:
    def __str__(self):
        return "READ"


# --- the type record --------------------------------------------------------


@dataclass(frozen=True)
class SequentialType:
    """Initial state plus pure update/query semantics for one kind of object.

    ``parse_op`` maps op text to an op value, ``is_update`` tells updates from
    queries, and ``format_value``/``parse_value`` give the canonical text form
    of query results.
    """

    name: str
    initial: State
    update: Callable[[State, Any], State]
    query: Callable[[State, Any], Value]
    is_update: Callable[[Any], bool]
    parse_op: Callable[[str], Any]
    format_value: Callable[[Value], str]
    parse_value: Callable[[str], Value]
    default_query: Any
    samples: tuple = ()

    def __repr__(self):
        return f"SequentialType({self.name!r})"


def apply(t: SequentialType, s: State, u) -> State:
    return t.update(s, u)


def eval_query(t: SequentialType, s: State, q) -> Value:
    return t.query(s, q)


def fold_from(t: SequentialType, s: State, updates: Iterable) -> State:
    return reduce(t.update, updates, s)


def fold(t: SequentialType, updates: Iterable) -> State:
    """Replay ``updates`` in order from the initial state."""
    return fold_from(t, t.initial, updates)


def check_total(t: SequentialType) -> None:
    """Reject a type whose update raises on its own sample ops.

    Totality cannot be proven in general; this smoke test applies every sample
    update to the initial state and to each state it produces.
    """
    states = [t.initial]
    for u in t.samples:
        if not t.is_update(u):
            continue
        try:
            states.extend(t.update(s, u) for s in list(states))
        except Exception as exc:
            raise AdtError(f"{t.name}: update {u} is not total ({exc})") from exc
    for s in states:
        try:
            hash(s)
        except TypeError as exc:
            raise AdtError(f"{t.name}: state {s!r} is not hashable") from exc


# --- op text ----------------------------------------------------------------

_INT_ARG = re.compile(r"^([A-Z]+)\((-?\d+)\)$")
_TOKEN_ARG = re.compile(r"^([A-Z]+)\(([^()\s,]+)\)$")


def _int_op(text: str, table: dict[str, type]):
    m = _INT_ARG.match(text)
    if m and m.group(1) in table:
        return table[m.group(1)](int(m.group(2)))
    raise AdtError(f"unknown op token {text!r}")


# --- integer set ------------------------------------------------------------


def _set_update(s: frozenset, op) -> frozenset:
    if isinstance(op, Insert):
        return s | {op.x}
    if isinstance(op, Delete):
        return s - {op.x}
    raise AdtError(f"not a set update: {op!r}")


def _set_query(s: frozenset, op) -> frozenset:
    if isinstance(op, SetRead):
        return s
    raise AdtError(f"not a set query: {op!r}")


def _set_parse_op(text: str):
    if text == "R":
        return SetRead()
    return _int_op(text, {"I": Insert, "D": Delete})


def format_set(v: Iterable[int]) -> str:
    return "{" + ",".join(str(x) for x in sorted(v)) + "}"


def parse_set(text: str) -> frozenset:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise AdtError(f"malformed set value {text!r}")
    body = text[1:-1].strip()
    if not body:
        return frozenset()
    try:
        return frozenset(int(p) for p in body.split(","))
    except ValueError:
        raise AdtError(f"malformed set value {text!r}") from None


IntSet = SequentialType(
    name="intset",
    initial=frozenset(),
    update=_set_update,
    query=_set_query,
    is_update=lambda op: isinstance(op, (Insert, Delete)),
    parse_op=_set_parse_op,
    format_value=format_set,
    parse_value=parse_set,
    default_query=SetRead(),
    samples=(Insert(1), Delete(1), Delete(2), Insert(2)),
)


# --- counter ----------------------------------------------------------------


def _counter_update(s: int, op) -> int:
    if isinstance(op, Increment):
        return s + op.d
    raise AdtError(f"not a counter update: {op!r}")


def _counter_query(s: int, op) -> int:
    if isinstance(op, Read):
        return s
    raise AdtError(f"not a counter query: {op!r}")


def _counter_parse_op(text: str):
    if text == "READ":
        return Read()
    return _int_op(text, {"INC": Increment})


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise AdtError(f"malformed integer value {text!r}") from None


Counter = SequentialType(
    name="counter",
    initial=0,
    update=_counter_update,
    query=_counter_query,
    is_update=lambda op: isinstance(op, Increment),
    parse_op=_counter_parse_op,
    format_value=str,
    parse_value=_parse_int,
    default_query=Read(),
    samples=(Increment(1), Increment(-3)),
)


# --- last-writer register ---------------------------------------------------


def _register_update(s: str, op) -> str:
    if isinstance(op, Write):
        return op.v
    raise AdtError(f"not a register update: {op!r}")


def _register_query(s: str, op) -> str:
    if isinstance(op, Read):
        return s
    raise AdtError(f"not a register query: {op!r}")


def _register_parse_op(text: str):
    if text == "READ":
        return Read()
    m = _TOKEN_ARG.match(text)
    if m and m.group(1) == "W":
        return Write(m.group(2))
    raise AdtError(f"unknown op token {text!r}")


def _register_value(text: str) -> str:
    if not text or any(c.isspace() or c in "()," for c in text):
        raise AdtError(f"malformed register value {text!r}")
    return text


def register(default: str) -> SequentialType:
    """A register whose value is the argument of the last write, else ``default``."""
    _register_value(default)
    return SequentialType(
        name=f"register:{default}",
        initial=default,
        update=_register_update,
        query=_register_query,
        is_update=lambda op: isinstance(op, Write),
        parse_op=_register_parse_op,
        format_value=str,
        parse_value=_register_value,
        default_query=Read(),
        samples=(Write("a"), Write(default)),
    )


def make_type(name: str) -> SequentialType:
    """Look up a type by its scenario/history name.

    ``intset``, ``counter`` and ``register:<default>`` are recognised.
    """
    if name == "intset":
        return IntSet
    if name == "counter":
        return Counter
    if name.startswith("register:"):
        return register(name.split(":", 1)[1])
    if name == "register":
        raise AdtError("register needs an explicit default, e.g. register:nil")
    raise AdtError(f"unknown ADT {name!r}")


def parse_ops(t: SequentialType, texts: Sequence[str]) -> list:
    return [t.parse_op(x) for x in texts]
