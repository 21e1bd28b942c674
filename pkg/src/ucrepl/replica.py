"""The universal update-consistent replica.

Every replica keeps a grow-only set of timestamped updates.  The visible state
of an object is the fold of that object's updates sorted by a comparator that
all replicas share, so a late update with a small timestamp simply lands
earlier in the replay.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .adt import SequentialType, check_total, fold
from .clock import LamportClock, ProcessId, Timestamp

ObjectId = str


class ReplicaError(Exception):
    pass


class DuplicateObject(ReplicaError):
    pass


class UnknownObject(ReplicaError):
    pass


class ReplicaCrashed(ReplicaError):
    pass


@dataclass(frozen=True)
class UpdateRecord:
    origin: ProcessId
    seq: int
    ts: Timestamp
    obj: ObjectId
    op: object

    @property
    def uid(self) -> tuple[ProcessId, int]:
        return (self.origin, self.seq)

    def encode(self) -> str:
        return f"U {self.origin} {self.seq} {self.ts} {self.obj} {self.op}"


_RECORD = re.compile(r"^U (\d+) (\d+) (\d+\.\d+) (\S+) (\S+)$")


def decode_record(line: str, types: Mapping[ObjectId, SequentialType]) -> UpdateRecord:
    m = _RECORD.match(line.strip())
    if not m:
        raise ValueError(f"malformed update record {line!r}")
    origin, seq, ts, obj, op = m.groups()
    if obj not in types:
        raise UnknownObject(obj)
    return UpdateRecord(int(origin), int(seq), Timestamp.parse(ts), obj, types[obj].parse_op(op))


class SyncDigest:
    """Per-origin highest contiguous seq held.  Missing origins count as 0."""

    __slots__ = ("_counts",)

    def __init__(self, counts: Mapping[ProcessId, int] | None = None):
        self._counts = tuple(sorted((p, n) for p, n in (counts or {}).items() if n > 0))

    def __getitem__(self, pid: ProcessId) -> int:
        return dict(self._counts).get(pid, 0)

    def as_dict(self) -> dict[ProcessId, int]:
        return dict(self._counts)

    def __eq__(self, other):
        return isinstance(other, SyncDigest) and self._counts == other._counts

    def __hash__(self):
        return hash(self._counts)

    def __repr__(self):
        return f"SyncDigest({self.as_dict()})"

    def encode(self) -> str:
        return "G {" + ",".join(f"{p}:{n}" for p, n in self._counts) + "}"

    @classmethod
    def decode(cls, line: str) -> SyncDigest:
        m = re.match(r"^G \{([0-9:,]*)\}$", line.strip())
        if not m:
            raise ValueError(f"malformed digest {line!r}")
        counts = {}
        for part in filter(None, m.group(1).split(",")):
            p, n = part.split(":")
            counts[int(p)] = int(n)
        return cls(counts)


# --- comparators --------------------------------------------------------------


class LamportPid:
    """Default order: by (lamport, pid) timestamp."""

    name = "lamport-pid"

    def key(self, rec: UpdateRecord):
        return rec.ts

    def __eq__(self, other):
        return type(other) is LamportPid

    def __hash__(self):
        return hash(self.name)


class PidSeq:
    """Static priority order: all updates of a higher-priority origin first.

    ``priority`` lists pids from first to last; unlisted pids follow in
    ascending order.
    """

    name = "pid-seq"

    def __init__(self, priority: Sequence[ProcessId] = ()):
        self.priority = tuple(priority)
        self._rank = {p: i for i, p in enumerate(self.priority)}

    def key(self, rec: UpdateRecord):
        return (self._rank.get(rec.origin, len(self._rank)), rec.origin, rec.seq)

    def __eq__(self, other):
        return isinstance(other, PidSeq) and self.priority == other.priority

    def __hash__(self):
        return hash((self.name, self.priority))


def make_comparator(name: str, priority: Sequence[ProcessId] = ()):
    if name == "lamport-pid":
        return LamportPid()
    if name == "pid-seq":
        return PidSeq(priority)
    raise ValueError(f"unknown comparator {name!r}")


# --- replica ------------------------------------------------------------------


class Replica:
    """One process's copy of every registered object.

    Operations are serialized by the caller.  ``log`` only grows; ``cache``
    always equals the fold of each object's sorted projection of ``log``.
    """

    def __init__(self, pid: ProcessId, comparator=None):
        self.pid = pid
        self.comparator = comparator or LamportPid()
        self.clock = LamportClock(pid)
        self.log: dict[tuple[ProcessId, int], UpdateRecord] = {}
        self.types: dict[ObjectId, SequentialType] = {}
        self.cache: dict[ObjectId, object] = {}
        self.crashed = False
        self._held: dict[ProcessId, int] = {}
        # records that arrived ahead of a missing seq from the same origin
        self._pending: dict[tuple[ProcessId, int], UpdateRecord] = {}

    def register_object(self, obj: ObjectId, t: SequentialType) -> None:
        if obj in self.types:
            raise DuplicateObject(obj)
        check_total(t)
        self.types[obj] = t
        self.cache[obj] = t.initial
        self._recompute(obj)

    def _type(self, obj: ObjectId) -> SequentialType:
        try:
            return self.types[obj]
        except KeyError:
            raise UnknownObject(obj) from None

    def sorted_log(self, obj: ObjectId | None = None) -> list[UpdateRecord]:
        recs = self.log.values()
        if obj is not None:
            recs = [r for r in recs if r.obj == obj]
        return sorted(recs, key=self.comparator.key)

    def _recompute(self, obj: ObjectId) -> None:
        t = self.types[obj]
        self.cache[obj] = fold(t, (r.op for r in self.sorted_log(obj)))

    def local_update(self, obj: ObjectId, op) -> UpdateRecord:
        if self.crashed:
            raise ReplicaCrashed(self.pid)
        t = self._type(obj)
        if not t.is_update(op):
            raise ReplicaError(f"{op} is not an update of {t.name}")
        self.clock, ts = self.clock.tick()
        seq = self._held.get(self.pid, 0) + 1
        rec = UpdateRecord(self.pid, seq, ts, obj, op)
        self._accept(rec)
        self._recompute(obj)
        return rec

    def receive_update(self, rec: UpdateRecord) -> bool:
        """Merge a remote record.  Returns True if the log grew."""
        self._type(rec.obj)
        if rec.uid in self.log or rec.uid in self._pending:
            return False
        self.clock = self.clock.observe(rec.ts)
        if rec.seq > self._held.get(rec.origin, 0) + 1:
            self._pending[rec.uid] = rec
            return False
        touched = {rec.obj}
        self._accept(rec)
        nxt = (rec.origin, rec.seq + 1)
        while nxt in self._pending:
            later = self._pending.pop(nxt)
            self._accept(later)
            touched.add(later.obj)
            nxt = (rec.origin, later.seq + 1)
        for obj in sorted(touched):
            self._recompute(obj)
        return True

    def receive_many(self, recs: Iterable[UpdateRecord]) -> bool:
        grew = False
        for rec in recs:
            grew |= self.receive_update(rec)
        return grew

    def observe_clock(self, lamport: int) -> None:
        """Fold a remote clock value carried by a non-update message."""
        self.clock = self.clock.observe(lamport)

    def _accept(self, rec: UpdateRecord) -> None:
        self.log[rec.uid] = rec
        self._held[rec.origin] = rec.seq

    def query(self, obj: ObjectId, q=None):
        t = self._type(obj)
        if q is None:
            q = t.default_query
        if t.is_update(q):
            raise ReplicaError(f"{q} is not a query of {t.name}")
        return t.query(self.cache[obj], q)

    def converged_value(self, obj: ObjectId, q=None):
        return self.query(obj, q)

    def make_digest(self) -> SyncDigest:
        return SyncDigest(self._held)

    def diff_since(self, remote: SyncDigest) -> list[UpdateRecord]:
        missing = [r for r in self.log.values() if r.seq > remote[r.origin]]
        return sorted(missing, key=self.comparator.key)

    @property
    def pending(self) -> list[UpdateRecord]:
        return sorted(self._pending.values(), key=lambda r: r.uid)


class IgnoreUpdatesReplica(Replica):
    """Eventually consistent baseline: disseminates updates but never applies them."""

    def _recompute(self, obj: ObjectId) -> None:
        self.cache[obj] = self.types[obj].initial


REPLICA_MODES = {"uc": Replica, "ignore-updates": IgnoreUpdatesReplica}
