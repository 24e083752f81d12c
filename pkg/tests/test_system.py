from __future__ import annotations

import copy
import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cms import SpecError, atom_of, catalog, parse_spec, validate
from cms.system import Interval, affine_sup, Affine

from conftest import build


def test_parse_accepts_text_and_mapping():
    doc = catalog.prdm()
    a = parse_spec(json.dumps(doc))
    b = parse_spec(doc)
    assert [x.id for x in a.atoms] == [x.id for x in b.atoms] == ["1", "2", "3"]
    assert a.edges[0].map.slope == Fraction(1, 2)


def test_no_edges_is_an_error():
    doc = catalog.prdm()
    doc["edges"] = []
    with pytest.raises(SpecError, match="system has no edges"):
        parse_spec(doc)


def test_zero_denominator():
    doc = catalog.prdm()
    doc["edges"][0]["map"]["slope"] = "1/0"
    with pytest.raises(SpecError, match="zero denominator"):
        parse_spec(doc)


def test_unknown_backend():
    with pytest.raises(SpecError, match="unknown backend"):
        parse_spec({"backend": "torus", "edges": [1]})


@pytest.mark.parametrize("field", ["atoms", "edges"])
def test_duplicate_ids(field):
    doc = catalog.prdm()
    doc[field].append(copy.deepcopy(doc[field][-1]))
    with pytest.raises(SpecError, match="duplicate"):
        parse_spec(doc)


def test_default_anchors(prdm, mcae):
    assert prdm.anchors == {"1": 0, "2": Fraction(1, 2), "3": 1}
    assert mcae.anchors["0"] == Fraction(1, 4)
    assert mcae.anchors["2"] == 1


def test_targets_resolved(prdm):
    assert {e.id: e.target for e in prdm.edges} == {"a": "2", "b": "2", "c": "2", "d": "2"}


def test_overlap_reports_witness():
    doc = catalog.prdm()
    doc["atoms"][1]["lo_closed"] = True  # (0,1) -> [0,1) now also holds 0
    with pytest.raises(SpecError, match=r"overlap.*contain 0"):
        validate(parse_spec(doc))


def test_gap_reported():
    doc = catalog.prdm()
    doc["atoms"][1]["hi"] = "9/10"
    with pytest.raises(SpecError, match="gap"):
        validate(parse_spec(doc))


def test_probability_sum_residual():
    doc = catalog.prdm()
    doc["edges"][1]["prob"] = {"slope": "1/2", "intercept": "0"}  # p0 = x/2, so the sum is 1 - x/2
    with pytest.raises(SpecError, match=r"sum to -1/2\*x \+ 1.*residual -1/2\*x \+ 0"):
        validate(parse_spec(doc))


def test_straddle_witness_at_cut():
    doc = catalog.prdm()
    doc["atoms"][1:2] = [
        {"id": 21, "kind": "interval", "lo": "0", "hi": "1/3", "lo_closed": False, "hi_closed": True},
        {"id": 22, "kind": "interval", "lo": "1/3", "hi": "1", "lo_closed": False, "hi_closed": False},
    ]
    doc["edges"] = [doc["edges"][0], doc["edges"][3]]
    for sub in (21, 22):
        doc["edges"].append({"id": f"b{sub}", "from": sub, "map": catalog.W0, "prob": catalog.X})
        doc["edges"].append({"id": f"c{sub}", "from": sub, "map": catalog.W1, "prob": catalog.ONE_MINUS_X})
    doc["anchors"] = {}
    with pytest.raises(SpecError, match=r"\(1/6, 1/2\) straddles atom boundary at 1/3"):
        validate(parse_spec(doc))


def test_image_leaving_space():
    doc = catalog.prdm()
    doc["edges"][1]["map"] = {"slope": "2", "intercept": "0"}
    with pytest.raises(SpecError, match="leaves the state space"):
        validate(parse_spec(doc))


def test_negative_probability_rejected():
    doc = catalog.prdm()
    doc["edges"][1]["prob"] = {"slope": "2", "intercept": "-1/2"}
    doc["edges"][2]["prob"] = {"slope": "-2", "intercept": "3/2"}
    with pytest.raises(SpecError, match="negative"):
        validate(parse_spec(doc))


def test_anchor_outside_atom():
    doc = catalog.prdm()
    doc["anchors"] = {"2": "1"}
    with pytest.raises(SpecError, match="not in atom 2"):
        validate(parse_spec(doc))


def test_atom_of_examples(prdm):
    assert atom_of(0, prdm) == "1"
    assert atom_of(Fraction(1, 2), prdm) == "2"
    assert atom_of(1, prdm) == "3"
    with pytest.raises(ValueError, match="outside"):
        atom_of(Fraction(3, 2), prdm)


@settings(max_examples=300, deadline=None)
@given(st.fractions(min_value=0, max_value=1))
def test_partition_property(x):
    system = build(catalog.prdm_dyadic(8))
    hits = [a.id for a in system.atoms if a.contains(x)]
    assert len(hits) == 1
    assert atom_of(x, system) == hits[0]


@pytest.mark.parametrize("name", ["prdm", "dmse", "gnce", "mcae", "prdm-dyadic"])
def test_markov_property_on_random_points(name):
    system = build(catalog.builtin(name))
    rng = random.Random(7)
    for _ in range(1000):
        x = Fraction(rng.randrange(0, 10 ** 6 + 1), 10 ** 6)
        src = atom_of(x, system)
        for e in system.edges_from(src):
            assert system.atom(e.target).contains(e.map(x))


def test_interval_helpers():
    iv = Interval(Fraction(0), Fraction(1), False, True)
    assert iv.boundary() == [0]
    assert Interval(Fraction(1, 4), Fraction(1, 2), True, True).subset_of(iv)
    assert not Interval(Fraction(0), Fraction(1, 2), True, True).subset_of(iv)
    assert affine_sup(Affine(Fraction(-1), Fraction(1)), iv) == 1  # sup over (0, 1] is not attained
    assert str(iv) == "(0, 1]"


def test_roundtrip_json(prdm):
    again = validate(parse_spec(prdm.to_json()))
    assert again.edges == prdm.edges and again.atoms == prdm.atoms


def test_unbounded_atom_parses():
    system = build(catalog.ieex(n_max=1000))
    assert system.atom_of(Fraction(-10 ** 9)) == "1"
    assert system.tail.eps_tail > 0


def test_tail_weight_bound_is_checked():
    doc = catalog.ieex(n_max=1000)
    doc["tail_family"]["tail_weight"] = "1/log(M)/100"
    with pytest.raises(SpecError, match="tail_weight"):
        validate(parse_spec(doc))


def test_tail_expressions_are_sandboxed():
    doc = catalog.ieex(n_max=100)
    doc["tail_family"]["weight"] = "__import__('os').getcwd()"
    with pytest.raises(SpecError):
        validate(parse_spec(doc))
