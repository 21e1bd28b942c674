import pytest
from hypothesis import given, settings, strategies as st

from oracles import naive_ec, naive_extensions, naive_reachable, naive_uc, random_history, witness_ok
from ucrepl.checker import (NonQuiescentHistory, SearchBoundExceeded, check_ec, check_uc,
                            is_witness, reachable_converged_values, witness_ops)
from ucrepl.history import History, parse


def fig1(p1_final, p2_final, p1_mid="{1}", p2_mid="{}"):
    return parse(f"""procs 2
object s intset
E 1 0 U s I(1)
E 1 1 U s D(2)
E 1 2 Q s R -> {p1_mid}
E 1 3 Q s R -> {p1_final} ω
E 2 0 U s I(2)
E 2 1 U s D(1)
E 2 2 Q s R -> {p2_mid}
E 2 3 Q s R -> {p2_final} ω
""")


def test_fig1a_neither():
    h = fig1("{2}", "{1}")
    assert check_ec(h) is False
    v = check_uc(h)
    assert not v.holds and not v.ec and "not EC" in v.reason


def test_fig1b_ec_not_uc():
    h = fig1("{1,2}", "{1,2}")
    assert check_ec(h)
    v = check_uc(h)
    assert not v.holds
    assert "{1,2}" in v.reason
    assert "ends with one of: D(2) (p1), D(1) (p2)" in v.reason


def test_fig1c_ec_and_uc():
    h = fig1("{1}", "{1}")
    v = check_uc(h)
    assert v.holds and check_ec(h)
    assert witness_ops(h, v.witness) == ["I(2)", "D(1)", "I(1)", "D(2)"]
    assert v.witness == [(2, 1), (2, 2), (1, 1), (1, 2)]


def test_single_process():
    h = History(1, {"s": "intset"})
    h.append(1, "U", "s", "I(1)")
    h.append(1, "Q", "s", "R", "{}", converged=True)
    assert check_ec(h)
    assert not check_uc(h).holds
    assert reachable_converged_values(h, "s") == {frozenset({1})}


def test_reachable_fig1_structure():
    h = fig1("{1}", "{1}")
    got = reachable_converged_values(h, "s")
    assert len(list(naive_extensions(h))) == 6
    assert got == naive_reachable(h, "s") == {frozenset(), frozenset({1}), frozenset({2})}


def test_reachable_trivial():
    h = History(1, {"s": "intset"})
    assert reachable_converged_values(h, "s") == {frozenset()}
    h.append(1, "U", "s", "I(1)")
    h.append(1, "U", "s", "I(2)")
    assert reachable_converged_values(h, "s") == {frozenset({1, 2})}


def test_missing_converged_read():
    h = History(2, {"s": "intset"})
    h.append(1, "Q", "s", "R", "{}", converged=True)
    with pytest.raises(NonQuiescentHistory):
        check_ec(h)
    with pytest.raises(NonQuiescentHistory):
        check_uc(h)


def test_crashed_reads_are_ignored():
    h = History(2, {"s": "intset"}, crashed={2})
    h.append(2, "U", "s", "I(5)")
    h.append(1, "Q", "s", "R", "{}", converged=True)
    # the crashed process's update may have been lost
    assert check_uc(h).holds
    h2 = History(2, {"s": "intset"}, crashed={2})
    h2.append(2, "U", "s", "I(5)")
    h2.append(1, "Q", "s", "R", "{5}", converged=True)
    assert check_uc(h2).holds


def test_bound():
    h = History(1, {"c": "counter"})
    for _ in range(17):
        h.append(1, "U", "c", "INC(1)")
    h.append(1, "Q", "c", "READ", "17", converged=True)
    with pytest.raises(SearchBoundExceeded):
        check_uc(h)
    assert check_uc(h, bound=17).holds


def test_multi_object_needs_one_global_order():
    h = parse("""procs 2
object a register:x
object b register:x
E 1 0 U a W(1)
E 1 1 U b W(1)
E 1 2 Q a READ -> 2 ω
E 1 3 Q b READ -> 2 ω
E 2 0 U b W(2)
E 2 1 U a W(2)
E 2 2 Q a READ -> 2 ω
E 2 3 Q b READ -> 2 ω
""")
    assert check_ec(h)
    # order a:W(1) b:W(1) b:W(2) a:W(2) gives a=2, b=2
    assert check_uc(h).holds == naive_uc(h) is True
    h2 = parse("""procs 2
object a register:x
object b register:x
E 1 0 U a W(1)
E 1 1 U b W(1)
E 1 2 Q a READ -> 1 ω
E 1 3 Q b READ -> 2 ω
E 2 0 U b W(2)
E 2 1 U a W(2)
E 2 2 Q a READ -> 1 ω
E 2 3 Q b READ -> 2 ω
""")
    # a=1 forces b:W(2) < a:W(2) < a:W(1) < b:W(1), so b cannot end at 2,
    # although each object on its own has an order that works
    assert check_uc(h2).holds == naive_uc(h2) is False


def test_is_witness():
    h = fig1("{1}", "{1}")
    assert is_witness(h, [(2, 1), (2, 2), (1, 1), (1, 2)])
    assert not is_witness(h, [(1, 1), (2, 1), (1, 2), (2, 2)])
    assert not is_witness(h, [(2, 2), (2, 1), (1, 1), (1, 2)])
    assert not is_witness(h, [(2, 1), (2, 2), (1, 1)])


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**9))
def test_checker_matches_naive_oracle(seed):
    h = random_history(seed)
    assert check_ec(h) == naive_ec(h)
    v = check_uc(h)
    assert v.holds == naive_uc(h)
    if v.holds:
        assert v.ec
        assert witness_ok(h, v.witness)
        assert is_witness(h, v.witness)
    for o in h.objects:
        assert reachable_converged_values(h, o) == naive_reachable(h, o)
