"""Recorded executions and their line-oriented text form.

A history file looks like::

    procs 2
    object s intset
    crashed 2
    E 1 0 U s I(1)
    E 1 1 Q s R -> {1}
    E 1 2 Q s R -> {1} ω

Events are listed by pid, then index.  The format is byte-stable: the
determinism checks compare serialized files directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from .adt import AdtError, SequentialType, make_type

OMEGA = "ω"


class HistoryError(ValueError):
    pass


class HistoryParseError(HistoryError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Event:
    pid: int
    index: int
    kind: str  # "U" or "Q"
    obj: str
    op: str
    returned: str | None = None
    converged: bool = False

    @property
    def is_update(self) -> bool:
        return self.kind == "U"

    def encode(self) -> str:
        line = f"E {self.pid} {self.index} {self.kind} {self.obj} {self.op}"
        if self.kind == "Q":
            line += f" -> {self.returned}"
            if self.converged:
                line += f" {OMEGA}"
        return line


@dataclass
class History:
    procs: int
    objects: dict[str, str] = field(default_factory=dict)  # obj -> ADT name
    crashed: frozenset[int] = frozenset()
    events: dict[int, list[Event]] = field(default_factory=dict)

    def __post_init__(self):
        self.crashed = frozenset(self.crashed)
        for p in self.pids:
            self.events.setdefault(p, [])

    @property
    def pids(self) -> range:
        return range(1, self.procs + 1)

    @property
    def live(self) -> list[int]:
        return [p for p in self.pids if p not in self.crashed]

    def types(self) -> dict[str, SequentialType]:
        return {o: make_type(name) for o, name in self.objects.items()}

    def append(self, pid: int, kind: str, obj: str, op: str,
               returned: str | None = None, converged: bool = False) -> Event:
        seq = self.events.setdefault(pid, [])
        ev = Event(pid, len(seq), kind, obj, op, returned, converged)
        seq.append(ev)
        return ev

    def updates(self, pid: int) -> list[Event]:
        return [e for e in self.events.get(pid, []) if e.is_update]

    def update_count(self) -> int:
        return sum(len(self.updates(p)) for p in self.pids)

    def converged_reads(self, pid: int) -> list[Event]:
        return [e for e in self.events.get(pid, []) if e.converged]

    def validate(self) -> None:
        for p, evs in self.events.items():
            if p not in self.pids:
                raise HistoryError(f"event for unknown process {p}")
            for i, e in enumerate(evs):
                if e.index != i or e.pid != p:
                    raise HistoryError(f"process {p}: indices not contiguous at {i}")
                if e.obj not in self.objects:
                    raise HistoryError(f"process {p}: unknown object {e.obj!r}")
                if e.converged and (e.kind != "Q"):
                    raise HistoryError(f"process {p}: converged marker on an update")
            # ω reads form the tail of a process (one per object)
            flags = [e.converged for e in evs]
            if True in flags and not all(flags[flags.index(True):]):
                raise HistoryError(f"process {p}: converged reads must be last")
        for p in self.crashed:
            if p not in self.pids:
                raise HistoryError(f"crashed process {p} out of range")


def serialize(h: History) -> str:
    if h.procs == 0 and not h.objects:
        return ""
    lines = [f"procs {h.procs}"]
    lines += [f"object {o} {name}" for o, name in h.objects.items()]
    lines += [f"crashed {p}" for p in sorted(h.crashed)]
    for p in h.pids:
        lines += [e.encode() for e in h.events.get(p, [])]
    return "\n".join(lines) + "\n"


def parse(text: str) -> History:
    procs = None
    objects: dict[str, str] = {}
    types: dict[str, SequentialType] = {}
    crashed: set[int] = set()
    events: dict[int, list[Event]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        head = parts[0]
        try:
            if head == "procs" and len(parts) == 2:
                procs = int(parts[1])
            elif head == "object" and len(parts) == 3:
                objects[parts[1]] = parts[2]
                types[parts[1]] = make_type(parts[2])
            elif head == "crashed" and len(parts) == 2:
                crashed.add(int(parts[1]))
            elif head == "E":
                ev = _parse_event(parts, types)
                seq = events.setdefault(ev.pid, [])
                if ev.index != len(seq):
                    raise HistoryError(f"expected index {len(seq)} for process {ev.pid}")
                seq.append(ev)
            else:
                raise HistoryError(f"unrecognised line {line!r}")
        except (ValueError, AdtError) as exc:
            raise HistoryParseError(lineno, str(exc)) from None
    if procs is None:
        if objects or events or crashed:
            raise HistoryParseError(1, "missing procs header")
        procs = 0
    h = History(procs, objects, frozenset(crashed), events)
    try:
        h.validate()
    except HistoryError as exc:
        raise HistoryParseError(0, str(exc)) from None
    return h


def _parse_event(parts: list[str], types: dict[str, SequentialType]) -> Event:
    if len(parts) < 6:
        raise HistoryError("truncated event")
    _, pid, index, kind, obj, op = parts[:6]
    rest = parts[6:]
    if obj not in types:
        raise HistoryError(f"unknown object {obj!r}")
    t = types[obj]
    parsed = t.parse_op(op)
    if kind == "U":
        if rest or not t.is_update(parsed):
            raise HistoryError(f"bad update event {op!r}")
        return Event(int(pid), int(index), "U", obj, op)
    if kind != "Q" or t.is_update(parsed):
        raise HistoryError(f"bad event kind {kind!r} for {op!r}")
    if len(rest) not in (2, 3) or rest[0] != "->":
        raise HistoryError("query needs '-> <value>'")
    converged = len(rest) == 3
    if converged and rest[2] != OMEGA:
        raise HistoryError(f"unexpected trailing token {rest[2]!r}")
    t.parse_value(rest[1])
    return Event(int(pid), int(index), "Q", obj, op, rest[1], converged)


def from_lines(lines: Iterable[str]) -> History:
    return parse("\n".join(lines))
