import json
import random

import pytest

from kpi2kvi import fixture_path, fixture_text
from kpi2kvi.formula import BinOp, Call, Expr, Interval, Neg, Num, Sym
from kpi2kvi.providers import Playbook
from kpi2kvi.taxonomy import Taxonomy, load_taxonomy


@pytest.fixture(scope="session")
def taxonomy() -> Taxonomy:
    return load_taxonomy(fixture_text("default.taxonomy.json"))


@pytest.fixture(scope="session")
def telemedicine_case() -> dict:
    return json.loads(fixture_text("telemedicine.case.json"))


@pytest.fixture()
def telemedicine_playbook() -> Playbook:
    return Playbook.load(fixture_path("telemedicine.playbook.json"))


_SYMBOL_POOL = ("a", "b", "c", "d")
# denominators are literals or symbols; symbol boxes stay positive and away
# from zero, so every generated (formula, box) pair is division-safe
_SAFE_DIVISORS = (0.5, 2.0, 4.0, 5.0, 10.0)


def random_formula(rng: random.Random, max_depth: int = 5, max_symbols: int = 4):
    """Seeded random (formula, bindings) pair for soundness testing."""
    symbols = list(_SYMBOL_POOL[: rng.randint(1, max_symbols)])

    def leaf() -> Expr:
        if rng.random() < 0.5:
            return Num(round(rng.uniform(0.0, 10.0), 2))
        return Sym(rng.choice(symbols))

    def build(depth: int) -> Expr:
        if depth <= 0 or rng.random() < 0.2:
            return leaf()
        pick = rng.random()
        if pick < 0.55:
            op = rng.choice("+-*/")
            left = build(depth - 1)
            if op == "/":
                right = Sym(rng.choice(symbols)) if rng.random() < 0.5 else Num(
                    rng.choice(_SAFE_DIVISORS)
                )
            else:
                right = build(depth - 1)
            return BinOp(op, left, right)
        if pick < 0.65:
            return Neg(build(depth - 1))
        if pick < 0.85:
            return Call(rng.choice(("min", "max")), (build(depth - 1), build(depth - 1)))
        lo = round(rng.uniform(0.0, 5.0), 2)
        hi = round(lo + rng.uniform(0.0, 5.0), 2)
        return Call("clamp", (build(depth - 1), Num(lo), Num(hi)))

    expr = build(rng.randint(1, max_depth))
    bindings = {}
    for name in symbols:
        lo = round(rng.uniform(0.2, 8.0), 3)
        hi = round(lo + rng.uniform(0.0, 4.0), 3)
        bindings[name] = Interval(lo, hi)
    return expr, bindings
