from __future__ import annotations

import random
from fractions import Fraction

import numpy as np
import pytest

from cms import SpecError, catalog
from cms.analysis import classify
from cms.coding import EventuallyPeriodicWord, coding_map_exact
from cms.refine import (Cut, coding_commute_check, cylinder_pushforward_check, invariance_check, parse_cuts,
                        refine)

F = Fraction


@pytest.fixture(scope="module")
def dyadic(prdm):
    return refine(prdm, parse_cuts("2@1/2:left-closed"))


def test_parse_cuts():
    assert parse_cuts("2@1/2, 3@1/4:right") == [Cut("2", F(1, 2), "left-closed"), Cut("3", F(1, 4), "right-closed")]
    with pytest.raises(SpecError, match="bad cut"):
        parse_cuts("2-1/2")
    with pytest.raises(SpecError, match="bad cut side"):
        parse_cuts("2@1/2:middle")


def test_dyadic_shape(dyadic):
    s = dyadic.system
    assert [a.id for a in s.atoms] == ["1", "2.1", "2.2", "3"]
    assert str(s.atom("2.1").interval) == "(0, 1/2]"
    assert str(s.atom("2.2").interval) == "(1/2, 1)"
    assert len(s.edges) == 6
    assert dyadic.r == {"a": "a", "b_1": "b", "b_2": "b", "c_1": "c", "c_2": "c", "d": "d"}
    assert dyadic.pieces["2"] == ["2.1", "2.2"]


def test_right_closed_side(prdm):
    ref = refine(prdm, [Cut("2", F(1, 2), "right-closed")])
    assert str(ref.system.atom("2.2").interval) == "[1/2, 1)"


def test_straddling_cut_rejected(prdm):
    with pytest.raises(SpecError, match="straddles atom boundary at 1/3"):
        refine(prdm, parse_cuts("2@1/3"))


def test_cut_outside_atom(prdm):
    with pytest.raises(SpecError, match="not interior"):
        refine(prdm, parse_cuts("2@1"))
    with pytest.raises(SpecError, match="unknown atom"):
        refine(prdm, parse_cuts("9@1/2"))


def test_cylinder_pushforward(dyadic):
    rows = cylinder_pushforward_check(dyadic, [F(1, 4), F(1, 2), F(3, 4)], max_depth=4)
    assert rows and all(r["ok"] for r in rows)
    assert any(r["base"] > 0 for r in rows)


def test_lift_is_unique(dyadic):
    assert dyadic.lifts(("b", "c"), F(3, 4)) == [("b_2", "c_1")]


def test_coding_commutes(dyadic):
    rows = coding_commute_check(dyadic, 100, random.Random(8))
    assert len(rows) == 100 and all(r["ok"] for r in rows)


def test_projection_of_periodic_word(dyadic):
    w = EventuallyPeriodicWord(("c_1",), ("b_1",))
    assert coding_map_exact(w, dyadic.system) == coding_map_exact(dyadic.project_periodic(w), dyadic.base) == F(1, 2)


def test_operator_invariance(dyadic):
    xs = np.random.default_rng(0).random(10_000)
    diffs = invariance_check(dyadic, xs)
    assert set(diffs) == {"x", "x^2", "sin", "step"}
    assert max(diffs.values()) == 0.0


def test_refined_dmse_keeps_verdict(dmse):
    ref = refine(dmse, parse_cuts("2@1/2"))
    rep = classify(ref.system)
    assert rep.consistency.status == "consistent"
    assert rep.existence.status == "existence guaranteed"


def test_tail_system_not_refinable():
    from conftest import build

    with pytest.raises(ValueError):
        refine(build(catalog.ieex(n_max=1000)), [])
