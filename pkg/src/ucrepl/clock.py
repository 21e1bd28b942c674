"""Lamport clocks and the (lamport, pid) total order over updates."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple

ProcessId = int


class Timestamp(NamedTuple):
    """Ordered lexicographically: lamport first, pid breaks ties."""

    lamport: int
    pid: ProcessId

    def __str__(self):
        return f"{self.lamport}.{self.pid}"

    @classmethod
    def parse(cls, text: str) -> Timestamp:
        lamport, sep, pid = text.partition(".")
        if not sep:
            raise ValueError(f"malformed timestamp {text!r}")
        return cls(int(lamport), int(pid))


class Order(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


def compare(a: Timestamp, b: Timestamp) -> Order:
    if a < b:
        return Order.LESS
    if a > b:
        return Order.GREATER
    return Order.EQUAL


@dataclass(frozen=True)
class LamportClock:
    pid: ProcessId
    counter: int = 0

    def tick(self) -> tuple[LamportClock, Timestamp]:
        nxt = LamportClock(self.pid, self.counter + 1)
        return nxt, Timestamp(nxt.counter, self.pid)

    def observe(self, remote: Timestamp | int) -> LamportClock:
        """Raise the counter to at least ``remote``; the next tick exceeds it."""
        lamport = remote.lamport if isinstance(remote, Timestamp) else remote
        if lamport <= self.counter:
            return self
        return LamportClock(self.pid, lamport)
