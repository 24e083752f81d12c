from __future__ import annotations

import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cms import catalog
from cms.analysis import contraction_certificate, coupling_constant_b
from cms.coding import (EventuallyPeriodicWord, WordError, coding_map_exact, coding_map_truncated, composite,
                        cylinder_prob, eval_X, first_break, holder_check, holder_constants, parse_word,
                        random_path, random_periodic_word, related_pair, truncation_bound, word_distance)

from conftest import build

F = Fraction
W = EventuallyPeriodicWord


def test_constant_word_codes_zero(prdm):
    assert coding_map_exact(W((), ("b",)), prdm) == 0


def test_period_bc(prdm):
    # period (c, b) applied as w_c o w_b: fixed point of x/4 + 1/2
    assert coding_map_exact(W((), ("b", "c")), prdm) == F(2, 3)
    assert coding_map_exact(W((), parse_word("c,b")), prdm) == F(2, 3)


def test_prefix_is_pushed_through(prdm):
    w = W((), ("b",))
    assert coding_map_exact(w.extend("c"), prdm) == F(1, 2)
    assert coding_map_exact(w.extend("c").extend("b"), prdm) == F(1, 4)


def test_depth_40_bound():
    assert truncation_bound(F(1, 2), F(1, 4), 40) == pytest.approx(4.60475e-06, rel=1e-5)


def test_inadmissible_word(prdm):
    assert first_break(("a", "d"), prdm) == 0  # a lands in 2, d leaves 3
    with pytest.raises(WordError):
        coding_map_exact(W((), ("b", "d")), prdm)


def test_first_break_position(prdm):
    assert first_break(("b", "c", "b"), prdm) is None
    assert first_break(("b", "a"), prdm) == 0


def test_noncontracting_period_rejected():
    doc = catalog.prdm()
    doc["edges"][1]["map"] = {"slope": "1", "intercept": "0"}
    doc["edges"][1]["prob"] = {"slope": "0", "intercept": "1/2"}
    doc["edges"][2]["prob"] = {"slope": "0", "intercept": "1/2"}
    with pytest.raises(WordError, match="no contracting fixed point"):
        coding_map_exact(W((), ("b",)), build(doc))


@pytest.mark.parametrize("name", ["prdm", "dmse", "gnce", "mcae"])
def test_truncation_is_sound(name):
    system = build(catalog.builtin(name))
    a, _ = contraction_certificate(system)
    b = coupling_constant_b(system)
    rng = random.Random(11)
    for _ in range(500):
        w = random_periodic_word(system, rng)
        depth = rng.randint(0, 30)
        x, bound = coding_map_truncated(w.backward(), depth, system, a, b)
        assert abs(float(x - coding_map_exact(w, system))) <= bound


def test_truncated_needs_enough_symbols(prdm):
    with pytest.raises(WordError, match="ended after 2"):
        coding_map_truncated(iter(["b", "b"]), 5, prdm)


@pytest.mark.parametrize("name", ["prdm", "dmse", "gnce", "mcae"])
def test_shift_compatibility(name):
    system = build(catalog.builtin(name))
    rng = random.Random(3)
    for _ in range(200):
        w = random_periodic_word(system, rng)
        last = w.truncated(0)[-1]
        for f in system.edges_from(system.edge(last).target):
            assert coding_map_exact(w.extend(f.id), system) == f.map(coding_map_exact(w, system))


def test_eval_X_uses_anchor(prdm):
    assert eval_X(("b",), prdm) == F(1, 4)
    assert eval_X(("a",), prdm) == F(1, 2)  # anchor of atom 1 is 0, then x/2 + 1/2
    assert composite(("b", "c"), prdm)(F(0)) == F(1, 2)


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=0, max_value=1), st.integers(min_value=0, max_value=2 ** 16), st.integers(1, 5))
def test_cylinder_additivity(x, seed, length):
    system = build(catalog.dmse())
    rng = random.Random(seed)
    src = system.atom_of(x)
    first = rng.choice([e.id for e in system.edges_from(src)])
    word = random_path(system, length, rng, start=first)
    total = sum((cylinder_prob(x, word + (f.id,), system)
                 for f in system.edges_from(system.edge(word[-1]).target)), F(0))
    assert total == cylinder_prob(x, word, system)


def test_cylinders_from_a_point_sum_to_one(gnce):
    x = F(1, 3)
    total = sum((cylinder_prob(x, (e.id,), gnce) for e in gnce.edges), F(0))
    assert total == 1


def test_word_distance():
    u = W(("b", "c"), ("b",))
    assert word_distance(u, u)[1]
    assert word_distance(u, W(("c", "c"), ("b",))) == (F(1, 2), False)
    assert word_distance(u, W(("b", "b"), ("b",))) == (F(1), False)


def test_holder_constants_prdm():
    const, expo = holder_constants(F(1, 2), F(1, 4))
    assert expo == pytest.approx(0.5)
    assert const == pytest.approx(8 * 0.25 / ((1 - math.sqrt(0.5)) * 0.5))
    assert const == pytest.approx(13.657, abs=1e-3)


@pytest.mark.parametrize("name", ["prdm", "dmse", "gnce"])
def test_holder_pairs(name):
    system = build(catalog.builtin(name))
    rng = random.Random(5)
    pairs = [related_pair(system, rng) for _ in range(200)]
    rep = holder_check(system, pairs)
    assert rep.violations == 0
    assert len(rep.rows) == 200


def test_parse_word_order():
    assert parse_word("c, b ,a") == ("a", "b", "c")
    assert str(W(("c",), ("b",))) == "(b)^inf,c"
