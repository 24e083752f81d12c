from __future__ import annotations

import copy
from fractions import Fraction

import numpy as np
import pytest

from cms import SpecError, catalog
from cms.analysis import classify, contraction_certificate, coupling_constant_b
from cms.simulation import RngStream
from cms.subshift import ShiftState, metric, parse_shift, subshift_step, validate_shift, words_of_length
from cms.thermo import run_subshift

from conftest import build

F = Fraction

MEM2 = {"backend": "subshift",
        "graph": {"vertices": ["u", "v"],
                  "edges": [{"id": "x", "from": "u", "to": "u"}, {"id": "y", "from": "u", "to": "v"},
                            {"id": "z", "from": "v", "to": "u"}]},
        "g": {"memory": 2, "table": {"x,x": "1/3", "x,y": "2/3", "z,x": "1/2", "z,y": "1/2", "y,z": "1"}}}


def _sys(doc):
    return validate_shift(parse_shift(copy.deepcopy(doc)))


def test_gmc_loads(gmc):
    assert gmc.backend == "subshift"
    assert gmc.subshift.transition_matrix()["1"]["2"] == F(7, 10)


def test_row_sum_error():
    doc = catalog.gmc((("3/10", "6/10"), ("3/5", "2/5")))
    with pytest.raises(SpecError, match="out of vertex 1 sum to 9/10"):
        _sys(doc)


def test_inadmissible_table_word():
    doc = copy.deepcopy(MEM2)
    doc["g"]["table"]["y,x"] = "0"
    with pytest.raises(SpecError, match="not admissible"):
        _sys(doc)


def test_wrong_length_word():
    doc = copy.deepcopy(MEM2)
    doc["g"]["table"]["x"] = "1"
    with pytest.raises(SpecError, match="expected 2"):
        _sys(doc)


def test_context_normalisation():
    doc = copy.deepcopy(MEM2)
    doc["g"]["table"]["z,y"] = "1/4"
    with pytest.raises(SpecError, match="after context z sum to 3/4"):
        _sys(doc)


def test_vertex_without_outgoing():
    doc = copy.deepcopy(MEM2)
    doc["graph"]["vertices"].append("w")
    with pytest.raises(SpecError, match="no outgoing"):
        _sys(doc)


def test_metric():
    assert metric(("a", "b", "c"), ("x", "b", "c")) == (F(1, 4), False)
    assert metric(("a", "b"), ("a", "c")) == (F(1), False)
    assert metric(("b", "c"), ("a", "b", "c")) == (F(1, 4), True)


def test_words_of_length():
    s = _sys(MEM2)
    w2 = words_of_length(s, 2)
    assert set(w2) == {("x", "x"), ("x", "y"), ("y", "z"), ("z", "x"), ("z", "y")}


def test_step_respects_context():
    s = _sys(MEM2)
    st = ShiftState(("y",), "v")
    st2, e, p = subshift_step(st, s, 0.99)
    assert e == "z" and p == 1.0 and st2.vertex == "u"
    _, e, p = subshift_step(ShiftState(("x",), "u"), s, 0.1)
    assert e == "x" and p == pytest.approx(1 / 3)


def test_no_forbidden_words_sampled():
    s = _sys(MEM2)
    tr = run_subshift(s, 20_000, RngStream(2))
    ids = [s.edge_ids[k] for k in tr.edges]
    assert s.admissible(ids)
    allowed = set(s.table)
    assert all(pair in allowed for pair in zip(ids, ids[1:]))
    # after x the next symbol is x with probability 1/3
    after_x = np.array([b == "x" for a, b in zip(ids, ids[1:]) if a == "x"])
    assert abs(after_x.mean() - 1 / 3) < 0.02


def test_subshift_constants(gmc):
    assert contraction_certificate(gmc) == (F(1, 2), True)
    assert coupling_constant_b(gmc) == 1


def test_subshift_json_roundtrip(gmc):
    again = build(gmc.to_json())
    assert again.subshift.table == gmc.subshift.table


def test_subshift_classified(gmc):
    assert classify(gmc).existence.rule == "eimc-i"
