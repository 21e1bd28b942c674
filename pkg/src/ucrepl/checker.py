"""Eventual- and update-consistency checks over recorded histories.

Only the converged (ω) reads matter: intermediate reads are ignored by both
checks.  A history is update consistent when some linear extension of the
per-process update orders folds, object by object, to the common converged
values.  Updates of crashed processes may have been lost before anyone saw
them, so for those processes any prefix of their updates is admissible.
"""

from __future__ import annotations

from dataclasses import dataclass

from .adt import SequentialType
from .history import History

DEFAULT_BOUND = 16

Uid = tuple[int, int]  # (pid, k): the k-th update (1-based) issued by pid


class CheckError(Exception):
    pass


class NonQuiescentHistory(CheckError):
    pass


class SearchBoundExceeded(CheckError):
    pass


@dataclass
class UcVerdict:
    holds: bool
    witness: list[Uid] | None = None
    reason: str = ""
    ec: bool = True

    def __bool__(self):
        return self.holds


@dataclass(frozen=True)
class _Constraint:
    pid: int
    obj: str
    query: object
    value: object


def _constraints(h: History, types: dict[str, SequentialType]) -> list[_Constraint]:
    out = []
    for p in h.live:
        seen: dict[str, int] = {}
        for e in h.converged_reads(p):
            seen[e.obj] = seen.get(e.obj, 0) + 1
            t = types[e.obj]
            out.append(_Constraint(p, e.obj, t.parse_op(e.op), t.parse_value(e.returned)))
        for o in h.objects:
            if seen.get(o, 0) != 1:
                raise NonQuiescentHistory(
                    f"process {p} has {seen.get(o, 0)} converged reads of {o!r}, expected 1")
    return out


def check_ec(h: History) -> bool:
    """All converged reads of each object agree across non-crashed processes."""
    types = h.types()
    values: dict[tuple[str, object], object] = {}
    for c in _constraints(h, types):
        key = (c.obj, c.query)
        if key in values and values[key] != c.value:
            return False
        values.setdefault(key, c.value)
    return True


def update_sequences(h: History, types=None) -> dict[int, list[tuple[Uid, str, object]]]:
    """Per process: ``(uid, obj, parsed op)`` for each update in issue order."""
    types = types or h.types()
    seqs = {}
    for p in h.pids:
        seqs[p] = [((p, k), e.obj, types[e.obj].parse_op(e.op))
                   for k, e in enumerate(h.updates(p), 1)]
    return seqs


def _search(h: History, types, bound: int):
    """Memoized walk over linear extensions.

    Nodes are consumed-prefix vectors; each node keeps the set of reachable
    state vectors, with one witness path per state.  Returns every terminal
    (state vector, path) pair: live processes fully consumed, crashed ones at
    any prefix.
    """
    n = h.update_count()
    if n > bound:
        raise SearchBoundExceeded(f"{n} updates exceed the search bound of {bound}")
    pids = list(h.pids)
    objs = list(h.objects)
    slot = {o: i for i, o in enumerate(objs)}
    seqs = update_sequences(h, types)
    lens = [len(seqs[p]) for p in pids]
    crashed = [p in h.crashed for p in pids]

    def terminal(vec):
        return all(c or v == ln for v, ln, c in zip(vec, lens, crashed))

    start = tuple(0 for _ in pids)
    level = {start: {tuple(types[o].initial for o in objs): ()}}
    finals: dict[tuple, tuple] = {}
    while level:
        nxt: dict[tuple, dict[tuple, tuple]] = {}
        for vec, states in level.items():
            if terminal(vec):
                for s, path in states.items():
                    finals.setdefault(s, path)
            for i, p in enumerate(pids):
                if vec[i] == lens[i]:
                    continue
                uid, obj, op = seqs[p][vec[i]]
                j = slot[obj]
                t = types[obj]
                child = vec[:i] + (vec[i] + 1,) + vec[i + 1:]
                bucket = nxt.setdefault(child, {})
                for s, path in states.items():
                    s2 = s[:j] + (t.update(s[j], op),) + s[j + 1:]
                    if s2 not in bucket:
                        bucket[s2] = path + (uid,)
        level = nxt
    return objs, finals


def _satisfies(states: tuple, objs, types, constraints) -> bool:
    slot = {o: i for i, o in enumerate(objs)}
    return all(types[c.obj].query(states[slot[c.obj]], c.query) == c.value
               for c in constraints)


def reachable_states(h: History, bound: int = DEFAULT_BOUND) -> dict[tuple, tuple]:
    """Terminal state vector -> one linear extension reaching it."""
    return _search(h, h.types(), bound)[1]


def reachable_converged_values(h: History, obj: str, bound: int = DEFAULT_BOUND) -> set:
    """Values of ``obj`` obtainable from folds of admissible linear extensions.

    The value is what the object's converged read returns (its default query
    when the history has none).
    """
    types = h.types()
    objs, finals = _search(h, types, bound)
    t = types[obj]
    q = t.default_query
    for p in h.live:
        reads = [e for e in h.converged_reads(p) if e.obj == obj]
        if reads:
            q = t.parse_op(reads[0].op)
            break
    j = objs.index(obj)
    return {t.query(s[j], q) for s in finals}


def check_uc(h: History, bound: int = DEFAULT_BOUND) -> UcVerdict:
    types = h.types()
    constraints = _constraints(h, types)
    if not check_ec(h):
        return UcVerdict(False, reason="not EC: converged reads disagree", ec=False)
    objs, finals = _search(h, types, bound)
    for s, path in finals.items():
        if _satisfies(s, objs, types, constraints):
            return UcVerdict(True, witness=list(path))
    return UcVerdict(False, reason=_explain(h, types, objs, finals, constraints))


def _explain(h, types, objs, finals, constraints) -> str:
    slot = {o: i for i, o in enumerate(objs)}
    target = {c.obj: c for c in constraints}
    parts = []
    for o, c in target.items():
        t = types[o]
        got = {t.query(s[slot[o]], c.query) for s in finals}
        shown = ", ".join(sorted(t.format_value(v) for v in got))
        if c.value not in got:
            parts.append(f"no linear extension folds {o} to {t.format_value(c.value)} "
                         f"(reachable: {shown})")
    if not parts:
        parts.append("no single linear extension satisfies every object at once")
    lasts = []
    seqs = update_sequences(h, types)
    for p in h.pids:
        if not seqs[p]:
            continue
        if p in h.crashed:
            lasts += [f"{op} (p{p})" for _, _, op in seqs[p]]
        else:
            lasts.append(f"{seqs[p][-1][2]} (p{p})")
    if lasts:
        parts.append("every linear extension ends with one of: " + ", ".join(lasts))
    return "; ".join(parts)


def is_witness(h: History, order: list[Uid]) -> bool:
    """True iff ``order`` is an admissible linear extension matching every converged read."""
    types = h.types()
    seqs = update_sequences(h, types)
    pos = {}
    for uid in order:
        if uid in pos:
            return False
        pos[uid] = len(pos)
    for p in h.pids:
        uids = [u for u, _, _ in seqs[p]]
        held = [u for u in uids if u in pos]
        if held != uids[:len(held)]:
            return False
        if p not in h.crashed and len(held) != len(uids):
            return False
        if [pos[u] for u in held] != sorted(pos[u] for u in held):
            return False
    known = {u for p in h.pids for u, _, _ in seqs[p]}
    if set(order) - known:
        return False
    by_uid = {u: (o, op) for p in h.pids for u, o, op in seqs[p]}
    objs = list(h.objects)
    state = [types[o].initial for o in objs]
    for uid in order:
        o, op = by_uid[uid]
        j = objs.index(o)
        state[j] = types[o].update(state[j], op)
    return _satisfies(tuple(state), objs, types, _constraints(h, types))


def witness_ops(h: History, order: list[Uid]) -> list[str]:
    ops = {(p, k): e.op for p in h.pids for k, e in enumerate(h.updates(p), 1)}
    return [ops[u] for u in order]


def classify(ec: bool, uc: bool) -> str:
    if uc:
        return "EC and UC"
    if ec:
        return "EC but not UC"
    return "Not EC and not UC"
