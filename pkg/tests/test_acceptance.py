"""Exit criteria for the build.  Each test carries one criterion and its tolerance."""

import io
import time
from contextlib import redirect_stdout

import pytest

from oracles import (happened_before_pairs, naive_ec, naive_reachable, naive_uc, random_history,
                     replay_witness_ok)
from ucrepl import cli
from ucrepl.adt import IntSet, fold
from ucrepl.checker import (check_ec, check_uc, is_witness, reachable_converged_values,
                            witness_ops)
from ucrepl.history import serialize
from ucrepl.simnet import INF, Scenario, ScriptEntry, random_scenario, simulate

RUNS = 200


@pytest.fixture(scope="module")
def property_runs():
    """The criterion-2 runs, shared with criteria 4 and 7."""
    t0 = time.perf_counter()
    runs = []
    for seed in range(RUNS):
        sc = random_scenario(seed)
        res = simulate(sc)
        ec = check_ec(res.history)
        uc = check_uc(res.history)
        runs.append((sc, res, ec, uc))
    return runs, time.perf_counter() - t0


@pytest.mark.criterion(1, "Figure 1 reproduction")
def test_figure_1_reproduction():
    t0 = time.perf_counter()
    out = io.StringIO()
    with redirect_stdout(out):
        status = cli.cmd_demo_figures()
    assert status == 0

    figs = cli.figure_histories()
    table = {}
    for name, h in figs.items():
        table[name] = (check_ec(h), check_uc(h))
    assert not table["1a"][0] and not table["1a"][1].holds
    assert table["1b"][0] and not table["1b"][1].holds
    assert table["1c"][0] and table["1c"][1].holds

    reason = table["1b"][1].reason
    assert "no linear extension folds s to {1,2}" in reason
    assert "ends with one of: D(2) (p1), D(1) (p2)" in reason
    assert reachable_converged_values(figs["1b"], "s") == {frozenset(), frozenset({1}), frozenset({2})}

    witness = table["1c"][1].witness
    ops = witness_ops(figs["1c"], witness)
    assert ops == ["I(2)", "D(1)", "I(1)", "D(2)"]
    assert fold(IntSet, [IntSet.parse_op(o) for o in ops]) == {1}

    lines = out.getvalue().splitlines()
    for row, label in zip(lines[1:4], ["Not EC and not UC", "EC but not UC", "EC and UC"]):
        assert label in row and row.endswith("ok")
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.criterion(2, "Universality at desk scale (200 randomized runs)")
def test_universality_property_suite(property_runs):
    runs, elapsed = property_runs
    assert len(runs) == RUNS
    for sc, res, ec, uc in runs:
        # scenario shape
        assert 3 <= sc.procs <= 5
        assert 1 <= len(sc.objects) <= 2 and {a for _, a in sc.objects} <= {"intset", "counter"}
        assert 1 <= len(sc.partitions) <= 3 and all(p.end != INF for p in sc.partitions)
        assert len(sc.crashes) <= 2 and sc.drop <= 0.3
        assert res.history.update_count() <= 12
        # verdicts
        assert ec, f"seed {sc.seed}: not EC"
        assert uc.holds, f"seed {sc.seed}: {uc.reason}"
        survivor = next(r for r in res.replicas.values() if not r.crashed)
        order = [r.uid for r in survivor.sorted_log()]
        assert is_witness(res.history, order)
        assert replay_witness_ok(res.history, order)
    assert elapsed < 60.0


@pytest.mark.criterion(3, "Strictness gap: ignore-updates baseline is EC, not UC")
def test_strictness_gap():
    t0 = time.perf_counter()
    sc = Scenario(1, objects=(("s", "intset"),), script=(ScriptEntry(1, 1, "s", "I(1)"),))
    h = simulate(sc, mode="ignore-updates").history
    assert check_ec(h) is True
    assert check_uc(h).holds is False
    assert serialize(simulate(sc, mode="ignore-updates").history) == serialize(h)
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.criterion(4, "Clock soundness over the criterion-2 runs")
def test_clock_soundness(property_runs):
    runs, _ = property_runs
    violations = []
    pairs = 0
    for sc, res, _, _ in runs:
        ts = {}
        for r in res.replicas.values():
            ts.update({uid: rec.ts for uid, rec in r.log.items()})
        for u, v in happened_before_pairs(res.trace, sc.procs):
            pairs += 1
            if not ts[u] < ts[v]:
                violations.append((sc.seed, u, v))
    assert pairs > 0
    assert violations == []


@pytest.mark.criterion(5, "Checker agrees with the naive oracle on 500 histories")
def test_checker_oracle_equivalence():
    t0 = time.perf_counter()
    disagreements = []
    kinds = set()
    for seed in range(500):
        h = random_history(seed, max_updates=8)
        assert h.update_count() <= 8
        v = check_uc(h)
        expected = naive_ec(h) and naive_uc(h)
        kinds.add(v.holds)
        if v.holds != expected:
            disagreements.append((seed, "verdict"))
        for o in h.objects:
            if reachable_converged_values(h, o) != naive_reachable(h, o):
                disagreements.append((seed, o))
    assert kinds == {True, False}
    assert disagreements == []
    assert time.perf_counter() - t0 < 30.0


@pytest.mark.criterion(6, "Determinism: 20 scenario/seed pairs, byte-identical histories")
def test_determinism(tmp_path):
    for i in range(20):
        sc = random_scenario(1000 + i).with_seed(i * 7919)
        a, b = tmp_path / f"{i}a.hist", tmp_path / f"{i}b.hist"
        a.write_text(serialize(simulate(sc).history), encoding="utf-8")
        b.write_text(serialize(simulate(sc).history), encoding="utf-8")
        assert a.read_bytes() == b.read_bytes()


@pytest.mark.criterion(7, "Convergence under healing in every criterion-2 run")
def test_convergence_under_healing(property_runs):
    runs, _ = property_runs
    long_partitions = 0
    for sc, res, _, _ in runs:
        live = [r for r in res.replicas.values() if not r.crashed]
        assert res.quiescent
        assert len({r.make_digest() for r in live}) == 1
        for obj, _ in sc.objects:
            assert len({r.converged_value(obj) for r in live}) == 1
        first = min((e.time for e in sc.script), default=0)
        if any(p.start <= first and p.end >= sc.horizon and len(p.blocks) > 1
               for p in sc.partitions):
            long_partitions += 1
    assert long_partitions > 0
