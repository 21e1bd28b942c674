"""Deterministic simulator of a partitionable, crash-prone message-passing system.

Scenario files are line oriented::

    procs 2
    object s intset
    at 1 1 s I(1)
    partition 0 3 1|2
    crash 5 2
    delay 1 3
    drop 0.1
    sync 4
    seed 7

Partition intervals are inclusive at both ends; ``inf`` as the end keeps the
partition forever.  When several partitions overlap, two processes can talk
only if every active partition puts them in the same block.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Sequence

from .adt import AdtError, make_type
from .history import History
from .replica import REPLICA_MODES, LamportPid, Replica

INF = math.inf


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScriptEntry:
    time: int
    pid: int
    obj: str
    op: str


@dataclass(frozen=True)
class Partition:
    start: int
    end: float  # int or INF
    blocks: tuple[frozenset[int], ...]

    def active(self, t: int) -> bool:
        return self.start <= t <= self.end


@dataclass(frozen=True)
class Crash:
    time: int
    pid: int


@dataclass(frozen=True)
class Heal:
    pass


@dataclass(frozen=True)
class Scenario:
    procs: int
    objects: tuple[tuple[str, str], ...] = ()
    script: tuple[ScriptEntry, ...] = ()
    partitions: tuple[Partition, ...] = ()
    crashes: tuple[Crash, ...] = ()
    min_delay: int = 1
    max_delay: int = 1
    drop: float = 0.0
    sync_period: int = 5
    seed: int = 0

    @property
    def horizon(self) -> int:
        return max((e.time for e in self.script), default=0)

    @property
    def pids(self) -> range:
        return range(1, self.procs + 1)

    def crash_time(self, pid: int) -> float:
        return min((c.time for c in self.crashes if c.pid == pid), default=INF)

    def with_seed(self, seed: int) -> Scenario:
        return replace(self, seed=seed)


def validate(sc: Scenario) -> None:
    """Raise :class:`ScenarioError` naming the first violated rule."""
    if sc.procs < 1:
        raise ScenarioError("procs: need at least one process")
    types = {}
    for obj, adt in sc.objects:
        if obj in types:
            raise ScenarioError(f"object: {obj!r} declared twice")
        try:
            types[obj] = make_type(adt)
        except AdtError as exc:
            raise ScenarioError(f"object: {exc}") from None
    for e in sc.script:
        if e.time < 0:
            raise ScenarioError(f"at: negative time {e.time}")
        if e.pid not in sc.pids:
            raise ScenarioError(f"at: unknown process {e.pid}")
        if e.obj not in types:
            raise ScenarioError(f"at: unknown object {e.obj!r}")
        try:
            types[e.obj].parse_op(e.op)
        except AdtError as exc:
            raise ScenarioError(f"at: {exc}") from None
        if e.time >= sc.crash_time(e.pid):
            raise ScenarioError(f"at: process {e.pid} is crashed at tick {e.time}")
    for part in sc.partitions:
        if part.start < 0 or part.end < part.start:
            raise ScenarioError(f"partition: bad interval [{part.start}, {part.end}]")
        seen: set[int] = set()
        for block in part.blocks:
            if seen & block:
                raise ScenarioError(f"partition: blocks overlap on {sorted(seen & block)}")
            if not block <= set(sc.pids):
                raise ScenarioError(f"partition: unknown pids {sorted(block - set(sc.pids))}")
            seen |= block
    for c in sc.crashes:
        if c.pid not in sc.pids or c.time < 0:
            raise ScenarioError(f"crash: bad entry {c.time} {c.pid}")
    if not 1 <= sc.min_delay <= sc.max_delay:
        raise ScenarioError("delay: need 1 <= min <= max")
    if not 0.0 <= sc.drop <= 1.0:
        raise ScenarioError("drop: probability outside [0, 1]")
    if sc.sync_period < 1:
        raise ScenarioError("sync: period must be positive")
    if not 0 <= sc.seed < 2**64:
        raise ScenarioError("seed: not a 64-bit unsigned integer")


def inject(sc: Scenario, fault, at: int) -> Scenario:
    """Return ``sc`` amended with ``fault`` at tick ``at``.

    ``fault`` is a :class:`Partition` (its ``start`` is replaced by ``at``),
    :class:`Heal` (clips every partition active at ``at``), or a pid to crash.
    Crashing a process drops its script entries from ``at`` on.
    """
    if isinstance(fault, Partition):
        out = replace(sc, partitions=sc.partitions + (replace(fault, start=at),))
    elif isinstance(fault, Heal):
        parts = []
        for p in sc.partitions:
            if p.start < at <= p.end:
                parts.append(replace(p, end=at - 1))
            elif p.start != at:
                parts.append(p)
        out = replace(sc, partitions=tuple(parts))
    elif isinstance(fault, Crash) or isinstance(fault, int):
        pid = fault.pid if isinstance(fault, Crash) else fault
        script = tuple(e for e in sc.script if not (e.pid == pid and e.time >= at))
        out = replace(sc, crashes=sc.crashes + (Crash(at, pid),), script=script)
    else:
        raise TypeError(f"unknown fault {fault!r}")
    validate(out)
    return out


# --- scenario text ------------------------------------------------------------


def parse_scenario(text: str) -> Scenario:
    fields: dict = {"objects": [], "script": [], "partitions": [], "crashes": []}
    procs = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *args = line.split()
        try:
            if head == "procs" and len(args) == 1:
                procs = int(args[0])
            elif head == "object" and len(args) == 2:
                fields["objects"].append((args[0], args[1]))
            elif head == "at" and len(args) == 4:
                fields["script"].append(ScriptEntry(int(args[0]), int(args[1]), args[2], args[3]))
            elif head == "partition" and len(args) == 3:
                end = INF if args[1] == "inf" else int(args[1])
                blocks = tuple(frozenset(int(p) for p in b.split(",") if p)
                               for b in args[2].split("|"))
                fields["partitions"].append(Partition(int(args[0]), end, blocks))
            elif head == "crash" and len(args) == 2:
                fields["crashes"].append(Crash(int(args[0]), int(args[1])))
            elif head == "delay" and len(args) == 2:
                fields["min_delay"], fields["max_delay"] = int(args[0]), int(args[1])
            elif head == "drop" and len(args) == 1:
                fields["drop"] = float(args[0])
            elif head == "sync" and len(args) == 1:
                fields["sync_period"] = int(args[0])
            elif head == "seed" and len(args) == 1:
                fields["seed"] = int(args[0])
            else:
                raise ScenarioError(f"unknown directive {line!r}")
        except ValueError as exc:
            raise ScenarioError(f"line {lineno}: {exc}") from None
    if procs is None:
        raise ScenarioError("procs: missing")
    for k in ("objects", "script", "partitions", "crashes"):
        fields[k] = tuple(fields[k])
    sc = Scenario(procs, **fields)
    validate(sc)
    return sc


def format_scenario(sc: Scenario) -> str:
    lines = [f"procs {sc.procs}"]
    lines += [f"object {o} {adt}" for o, adt in sc.objects]
    lines += [f"at {e.time} {e.pid} {e.obj} {e.op}" for e in sc.script]
    for p in sc.partitions:
        end = "inf" if p.end == INF else str(p.end)
        blocks = "|".join(",".join(str(x) for x in sorted(b)) for b in p.blocks)
        lines.append(f"partition {p.start} {end} {blocks}")
    lines += [f"crash {c.time} {c.pid}" for c in sc.crashes]
    lines.append(f"delay {sc.min_delay} {sc.max_delay}")
    lines.append(f"drop {sc.drop!r}")
    lines.append(f"sync {sc.sync_period}")
    lines.append(f"seed {sc.seed}")
    return "\n".join(lines) + "\n"


# --- simulation -----------------------------------------------------------------


@dataclass
class Message:
    id: int
    due: int
    src: int
    dst: int
    kind: str  # "update" | "digest" | "diff"
    payload: object
    lamport: int  # sender's clock at send time


@dataclass(frozen=True)
class TraceEvent:
    """One step of the causal trace: ``issue`` (uid), ``send`` / ``recv`` (message id)."""

    kind: str
    pid: int
    ref: object
    tick: int = 0


@dataclass
class SimResult:
    history: History
    replicas: dict[int, Replica]
    trace: list[TraceEvent]
    quiescent: bool
    ticks: int
    rounds: int


class SimState:
    """Mutable state of one run.  :meth:`step` advances a single tick."""

    def __init__(self, sc: Scenario, mode: str = "uc", comparator=None):
        validate(sc)
        self.sc = sc
        self.tick = 0
        self.rng = random.Random(sc.seed)
        cls = REPLICA_MODES[mode]
        comparator = comparator or LamportPid()
        self.replicas: dict[int, Replica] = {}
        for p in sc.pids:
            r = cls(p, comparator)
            for obj, adt in sc.objects:
                r.register_object(obj, make_type(adt))
            self.replicas[p] = r
        self.types = {obj: make_type(adt) for obj, adt in sc.objects}
        self.in_flight: list[Message] = []
        self.trace: list[TraceEvent] = []
        self.history = History(sc.procs, dict(sc.objects))
        self._msg_ids = 0
        self._script: dict[int, list[ScriptEntry]] = {}
        for e in sorted(sc.script, key=lambda e: (e.time, e.pid)):
            self._script.setdefault(e.time, []).append(e)

    # -- topology --

    def alive(self, pid: int) -> bool:
        return not self.replicas[pid].crashed

    def connected(self, a: int, b: int, t: int | None = None) -> bool:
        t = self.tick if t is None else t
        for part in self.sc.partitions:
            if part.active(t) and not any(a in blk and b in blk for blk in part.blocks):
                return False
        return True

    @property
    def last_fault(self) -> float:
        times = [c.time for c in self.sc.crashes]
        times += [p.end for p in self.sc.partitions]
        return max(times, default=0)

    # -- messaging --

    def send(self, src: int, dst: int, kind: str, payload) -> Message | None:
        self._msg_ids += 1
        drop = self.rng.random() < self.sc.drop
        delay = self.rng.randint(self.sc.min_delay, self.sc.max_delay)
        if not self.connected(src, dst) or drop:
            return None
        msg = Message(self._msg_ids, self.tick + delay, src, dst, kind, payload,
                      self.replicas[src].clock.counter)
        self.trace.append(TraceEvent("send", src, msg.id, self.tick))
        self.in_flight.append(msg)
        return msg

    def deliver(self, msg: Message) -> bool:
        """Hand ``msg`` to its destination.  Returns True if a log grew."""
        r = self.replicas[msg.dst]
        if r.crashed:
            return False
        self.trace.append(TraceEvent("recv", msg.dst, msg.id, self.tick))
        r.observe_clock(msg.lamport)
        if msg.kind == "update":
            return r.receive_update(msg.payload)
        if msg.kind == "digest":
            diff = r.diff_since(msg.payload)
            if diff:
                self.send(msg.dst, msg.src, "diff", tuple(diff))
            return False
        return r.receive_many(msg.payload)

    # -- ticking --

    def step(self, sync: bool = True) -> None:
        t = self.tick
        for c in self.sc.crashes:
            if c.time == t:
                self.replicas[c.pid].crashed = True
        for e in self._script.get(t, ()):
            self._execute(e)
        due = [m for m in self.in_flight if m.due == t]
        self.in_flight = [m for m in self.in_flight if m.due != t]
        for msg in due:
            self.deliver(msg)
        if sync and t % self.sc.sync_period == 0:
            self.start_sync()
        self.tick += 1

    def _execute(self, e: ScriptEntry) -> None:
        r = self.replicas[e.pid]
        if r.crashed:
            return
        t = self.types[e.obj]
        op = t.parse_op(e.op)
        if t.is_update(op):
            rec = r.local_update(e.obj, op)
            self.trace.append(TraceEvent("issue", e.pid, rec.uid, self.tick))
            self.history.append(e.pid, "U", e.obj, e.op)
            for q in self.sc.pids:
                if q != e.pid:
                    self.send(e.pid, q, "update", rec)
        else:
            value = t.format_value(r.query(e.obj, op))
            self.history.append(e.pid, "Q", e.obj, e.op, value)

    def start_sync(self) -> None:
        for p in self.sc.pids:
            if not self.alive(p):
                continue
            digest = self.replicas[p].make_digest()
            for q in self.sc.pids:
                if q != p:
                    self.send(p, q, "digest", digest)

    # -- quiescence --

    def drain(self) -> None:
        """Tick through the script and fault schedule, then until nothing is in flight.

        No new anti-entropy starts once the schedule is over, so the second
        phase terminates.  An unending partition is not waited out.
        """
        end = max(self.sc.horizon, self.last_fault if self.last_fault != INF else 0)
        while self.tick <= end:
            self.step()
        while self.in_flight:
            self.step(sync=False)

    def sync_round(self) -> bool:
        """One reliable all-pairs anti-entropy round among connected survivors."""
        grew = False
        live = [p for p in self.sc.pids if self.alive(p)]
        for p in live:
            for q in live:
                if p == q or not self.connected(p, q):
                    continue
                ask = self._direct(p, q, "digest", self.replicas[p].make_digest())
                diff = self.replicas[q].diff_since(ask.payload)
                if diff:
                    reply = self._direct(q, p, "diff", tuple(diff))
                    grew |= self.replicas[p].receive_many(reply.payload)
        return grew

    def _direct(self, src: int, dst: int, kind: str, payload) -> Message:
        self._msg_ids += 1
        msg = Message(self._msg_ids, self.tick, src, dst, kind, payload,
                      self.replicas[src].clock.counter)
        self.trace.append(TraceEvent("send", src, msg.id, self.tick))
        self.trace.append(TraceEvent("recv", dst, msg.id, self.tick))
        self.replicas[dst].observe_clock(msg.lamport)
        return msg

    def fully_connected(self) -> bool:
        live = [p for p in self.sc.pids if self.alive(p)]
        return all(self.connected(a, b) for a in live for b in live)


def simulate(sc: Scenario, mode: str = "uc", comparator=None) -> SimResult:
    """Run ``sc`` to quiescence and record the resulting history.

    After the script, faults and in-flight messages are exhausted, reliable
    anti-entropy rounds run until no log changes.  Each surviving replica then
    reads every object once; those reads carry the converged marker only if
    all survivors ended up mutually reachable.
    """
    sim = SimState(sc, mode, comparator)
    sim.drain()
    rounds = 1
    while sim.sync_round():
        rounds += 1
    quiescent = sim.fully_connected()
    h = sim.history
    for p in sc.pids:
        r = sim.replicas[p]
        if r.crashed:
            continue
        for obj, t in sim.types.items():
            q = t.default_query
            h.append(p, "Q", obj, str(q), t.format_value(r.converged_value(obj, q)),
                     converged=quiescent)
    h.crashed = frozenset(p for p in sc.pids if sim.replicas[p].crashed)
    return SimResult(h, sim.replicas, sim.trace, quiescent, sim.tick, rounds)


def run(sc: Scenario, mode: str = "uc", comparator=None) -> History:
    return simulate(sc, mode, comparator).history


# --- random scenarios -------------------------------------------------------------


def random_scenario(seed: int, procs: Sequence[int] = (3, 5), max_updates: int = 12,
                    adts: Sequence[str] = ("intset", "counter"), max_objects: int = 2,
                    partitions: Sequence[int] = (1, 3), max_crashes: int = 2,
                    max_drop: float = 0.3, reads: bool = True) -> Scenario:
    """A random scenario whose partitions all heal before the run ends.

    Crashes always leave at least one survivor.  A partition may outlast the
    whole client script.
    """
    rng = random.Random(seed)
    n = rng.randint(*procs)
    objects = tuple((f"o{i}", rng.choice(adts)) for i in range(rng.randint(1, max_objects)))
    horizon = rng.randint(4, 20)
    crashes = []
    for pid in rng.sample(range(1, n + 1), rng.randint(0, min(max_crashes, n - 1))):
        crashes.append(Crash(rng.randint(1, horizon + 2), pid))
    crash_at = {c.pid: c.time for c in crashes}

    script = []
    for _ in range(rng.randint(0, max_updates)):
        obj, adt = rng.choice(objects)
        x = rng.randint(1, 3)
        op = {"intset": rng.choice([f"I({x})", f"D({x})"]), "counter": f"INC({rng.randint(-2, 3)})"}[adt]
        script.append(ScriptEntry(rng.randint(0, horizon), rng.randint(1, n), obj, op))
    if reads:
        for _ in range(rng.randint(0, 4)):
            obj, adt = rng.choice(objects)
            script.append(ScriptEntry(rng.randint(0, horizon), rng.randint(1, n), obj,
                                      {"intset": "R", "counter": "READ"}[adt]))
    script = [e for e in script if e.time < crash_at.get(e.pid, INF)]

    parts = []
    for i in range(rng.randint(*partitions)):
        start = rng.randint(0, horizon)
        end = rng.randint(start, horizon + 10)
        if i == 0 and rng.random() < 0.3:
            start, end = 0, horizon + rng.randint(0, 10)  # outlasts the script
        pids = list(range(1, n + 1))
        rng.shuffle(pids)
        cuts = sorted(rng.sample(range(1, n), rng.randint(1, n - 1)))
        blocks = [frozenset(pids[a:b]) for a, b in zip([0] + cuts, cuts + [n])]
        # occasionally leave a process out of every block (isolated)
        if len(blocks) > 1 and rng.random() < 0.2:
            blocks.pop(rng.randrange(len(blocks)))
        parts.append(Partition(start, end, tuple(blocks)))

    lo = rng.randint(1, 3)
    sc = Scenario(
        procs=n,
        objects=objects,
        script=tuple(sorted(script, key=lambda e: (e.time, e.pid))),
        partitions=tuple(parts),
        crashes=tuple(crashes),
        min_delay=lo,
        max_delay=lo + rng.randint(0, 4),
        drop=round(rng.uniform(0, max_drop), 3),
        sync_period=rng.randint(2, 6),
        seed=rng.getrandbits(64),
    )
    validate(sc)
    return sc


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as f:
        return parse_scenario(f.read())

