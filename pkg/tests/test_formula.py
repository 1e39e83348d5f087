import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_formula
from kpi2kvi.formula import (
    BinOp,
    EvalError,
    FormulaSyntaxError,
    Interval,
    Num,
    Sym,
    brute_force_range,
    depth,
    eval_interval,
    eval_point,
    format_formula,
    free_symbols,
    parse_formula,
    symbol_occurrences,
)

SLACK = 1e-9


def test_parse_ratio_formula():
    e = parse_formula("100 * A_p / N_p")
    assert e == BinOp("/", BinOp("*", Num(100.0), Sym("A_p")), Sym("N_p"))
    assert free_symbols(e) == {"A_p", "N_p"}


def test_parse_literal():
    assert parse_formula("3") == Num(3.0)
    assert free_symbols(parse_formula("3")) == set()


def test_parse_unbalanced_paren():
    with pytest.raises(FormulaSyntaxError) as exc:
        parse_formula("clamp(x, 0, 100")
    assert exc.value.offset == len("clamp(x, 0, 100")


def test_parse_unknown_function():
    with pytest.raises(FormulaSyntaxError, match="unknown function"):
        parse_formula("sqrt(4)")


def test_parse_wrong_arity():
    with pytest.raises(FormulaSyntaxError, match="arguments"):
        parse_formula("min(1, 2, 3)")


def test_precedence_and_associativity():
    assert parse_formula("1 + 2 * 3") == BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))
    # left associativity
    assert eval_point(parse_formula("8 - 3 - 2"), {}) == 3.0
    assert eval_point(parse_formula("16 / 4 / 2"), {}) == 2.0


def test_eval_point_likert():
    assert eval_point(parse_formula("100*(r_s - 1)/4"), {"r_s": 4.1}) == pytest.approx(77.5)


def test_eval_point_privacy_share():
    assert eval_point(parse_formula("100*A_p/N_p"), {"A_p": 8, "N_p": 10}) == pytest.approx(80.0)


def test_eval_point_unbound_symbol():
    with pytest.raises(EvalError, match="x"):
        eval_point(parse_formula("x + 1"), {})


def test_eval_point_division_by_zero():
    with pytest.raises(EvalError, match="division by zero"):
        eval_point(parse_formula("1 / x"), {"x": 0.0})


def test_eval_point_clamp_reversed():
    with pytest.raises(EvalError, match="clamp"):
        eval_point(parse_formula("clamp(x, y, z)"), {"x": 1, "y": 5, "z": 2})


def test_eval_interval_privacy_share():
    iv = eval_interval(
        parse_formula("100*A_p/N_p"), {"A_p": Interval(7, 9), "N_p": Interval(10, 10)}
    )
    assert iv.lo == pytest.approx(70.0, abs=SLACK)
    assert iv.hi == pytest.approx(90.0, abs=SLACK)


def test_eval_interval_likert():
    iv = eval_interval(parse_formula("100*(r_s-1)/4"), {"r_s": Interval(3.8, 4.4)})
    assert iv.lo == pytest.approx(70.0, abs=SLACK)
    assert iv.hi == pytest.approx(85.0, abs=SLACK)


def test_eval_interval_dependency_overapproximation():
    # x*(10-x) over [2,8]: true range [16,25]; interval arithmetic gives [4,64]
    e = parse_formula("x*(10 - x)")
    iv = eval_interval(e, {"x": Interval(2, 8)})
    assert iv.lo == pytest.approx(4.0) and iv.hi == pytest.approx(64.0)
    oracle = brute_force_range(e, {"x": Interval(2, 8)}, 6001)
    assert oracle.lo == pytest.approx(16.0, abs=1e-6)
    assert oracle.hi == pytest.approx(25.0, abs=1e-6)
    assert iv.contains(oracle, slack=SLACK)


def test_eval_interval_division_through_zero():
    with pytest.raises(EvalError, match="touches zero"):
        eval_interval(parse_formula("1 / x"), {"x": Interval(-1, 1)})
    with pytest.raises(EvalError, match="touches zero"):
        eval_interval(parse_formula("1 / x"), {"x": Interval(0, 2)})


def test_brute_force_monotone_matches_interval():
    e = parse_formula("100*A_p/N_p")
    box = {"A_p": Interval(7, 9), "N_p": Interval(10, 10)}
    oracle = brute_force_range(e, box, 101)
    assert oracle.lo == pytest.approx(70.0) and oracle.hi == pytest.approx(90.0)


def test_brute_force_constant():
    iv = brute_force_range(parse_formula("5"), {}, 10)
    assert (iv.lo, iv.hi) == (5.0, 5.0)


def test_brute_force_symbol_limit():
    e = parse_formula("a+b+c+d+e")
    with pytest.raises(ValueError, match="4 symbols"):
        brute_force_range(e, {n: Interval(0, 1) for n in "abcde"}, 3)


def test_format_round_trip_examples():
    for src in ("100 * A_p / N_p", "clamp(100 * (1 - P_s / P_m), 0, 100)", "-(a + b) * 3"):
        e = parse_formula(src)
        assert parse_formula(format_formula(e)) == e


def test_depth_and_occurrences():
    e = parse_formula("100 * clamp(2 - P_u, 0, 1)")
    assert depth(e) == 3
    assert symbol_occurrences(e) == ["P_u"]


# --- randomized properties -------------------------------------------------


@given(st.integers(0, 10_000))
@settings(max_examples=200, deadline=None)
def test_containment_property(seed):
    rng = random.Random(seed)
    expr, box = random_formula(rng)
    outer = eval_interval(expr, box)
    inner = brute_force_range(expr, box, 30)
    assert outer.contains(inner, slack=SLACK)


@given(st.integers(0, 10_000))
@settings(max_examples=200, deadline=None)
def test_point_membership_property(seed):
    rng = random.Random(seed)
    expr, box = random_formula(rng)
    outer = eval_interval(expr, box)
    point = {n: rng.uniform(iv.lo, iv.hi) for n, iv in box.items()}
    v = eval_point(expr, point)
    assert outer.lo - SLACK <= v <= outer.hi + SLACK


@given(st.integers(0, 10_000))
@settings(max_examples=200, deadline=None)
def test_single_occurrence_exactness(seed):
    rng = random.Random(seed)
    expr, box = random_formula(rng)
    occs = symbol_occurrences(expr)
    if len(occs) != len(set(occs)):
        return  # only single-occurrence formulas are dependency-free
    outer = eval_interval(expr, box)
    inner = brute_force_range(expr, box, 50)
    # extremes sit at box corners, which the grid includes
    assert abs(outer.lo - inner.lo) <= SLACK and abs(outer.hi - inner.hi) <= SLACK


@given(st.integers(0, 10_000))
@settings(max_examples=200, deadline=None)
def test_degenerate_collapse(seed):
    rng = random.Random(seed)
    expr, box = random_formula(rng)
    points = {n: iv.lo for n, iv in box.items()}
    iv = eval_interval(expr, {n: Interval(v, v) for n, v in points.items()})
    v = eval_point(expr, points)
    assert iv.lo == pytest.approx(v, abs=SLACK) and iv.hi == pytest.approx(v, abs=SLACK)


@given(st.integers(0, 10_000))
@settings(max_examples=300, deadline=None)
def test_parser_round_trip_property(seed):
    rng = random.Random(seed)
    expr, _ = random_formula(rng)
    printed = format_formula(expr)
    reparsed = parse_formula(printed)
    assert reparsed == expr
    assert format_formula(reparsed) == printed
