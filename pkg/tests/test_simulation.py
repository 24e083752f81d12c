from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from cms import catalog
from cms.coding import cylinder_prob
from cms.simulation import (CompiledSystem, DivergenceError, RngStream, apply_U, cesaro_gap, invariance_residual,
                            occupation, occupation_tightness, phi_cylinder_estimate, run, run_replicas, step, un_L)

import oracles
from conftest import build

F = Fraction


def test_rng_is_counter_based():
    a = RngStream(42, 3).uniforms(5)
    b = RngStream(42, 3).uniforms(5)
    c = RngStream(42, 4).uniforms(5)
    assert np.array_equal(a, b) and not np.array_equal(a, c)
    with pytest.raises(ValueError):
        RngStream(-1)


def test_run_is_deterministic(prdm):
    m1, t1 = run(prdm, 0.7, 5000, 100, RngStream(1))
    m2, t2 = run(prdm, 0.7, 5000, 100, RngStream(1))
    assert np.array_equal(m1.counts, m2.counts)
    assert np.array_equal(t1.states, t2.states)
    assert m1.mean == m2.mean


def test_replicas_independent_of_threads(prdm):
    one = run_replicas(prdm, 0.7, 20_000, 1000, seed=9, replicas=3, threads=1)
    many = run_replicas(prdm, 0.7, 20_000, 1000, seed=9, replicas=3, threads=3)
    assert np.array_equal(one.counts, many.counts)
    assert one.sum_x == many.sum_x
    assert np.array_equal(one.reservoir, many.reservoir)


def test_moments_match_recursion(prdm):
    m1, m2 = oracles.halving_moments()
    m, _ = run(prdm, 0.7, 200_000, 10_000, RngStream(5), keep_trajectory=False)
    se = m.standard_errors()
    assert abs(m.mean - float(m1)) <= max(4 * se[0], 5e-3)
    assert abs(m.second_moment - float(m2)) <= max(4 * se[1], 5e-3)


def test_invariance_residuals_small(prdm):
    m, _ = run(prdm, 0.3, 200_000, 10_000, RngStream(6), keep_trajectory=False)
    res = invariance_residual(prdm, m)
    assert set(res) == {"x", "x^2", "1[atom 1]", "1[atom 2]", "1[atom 3]"}
    assert max(res.values()) <= 0.01


def test_apply_U_exact_on_grid(prdm):
    xs = np.linspace(0, 1, 11)
    # U x = x * x/2 + (1-x)(x/2 + 1/2) = 1/2 on (0,1); 1/2 at both ends too
    assert np.allclose(apply_U(prdm, "x", xs), 0.5)
    assert np.allclose(apply_U(prdm, lambda y: y, xs), 0.5)


def test_dmse_from_zero_stays_in_atom_one(dmse):
    for n in (1, 10, 1000, 20_000):
        occ = occupation(dmse, 0, n, RngStream(n))
        assert occ["1"] == 1.0


def test_snap_keeps_exact_endpoints():
    cs = CompiledSystem(build(catalog.dmse()))
    assert cs.snap(1e-17) == 0.0
    assert cs.snap(1 - 1e-16) == 1.0
    assert cs.atoms[cs.locate(0.0)].id == "1"


def test_x0_outside_space(prdm):
    with pytest.raises(ValueError, match="outside"):
        run(prdm, 1.5, 100, 0, RngStream(0))


def test_steps_must_exceed_burn(prdm):
    with pytest.raises(ValueError, match="steps > burn_in"):
        run(prdm, 0.5, 100, 100, RngStream(0))


def test_step_returns_edge(prdm):
    y, e, p = step(0.5, prdm, RngStream(3))
    assert e in {"b", "c"} and p == pytest.approx(0.5)
    assert y in (0.25, 0.75)


def test_dyadic_tightness():
    system = build(catalog.prdm_dyadic(24))
    rep = occupation_tightness(system, 0.7, 100_000, RngStream(12), windows=[5, 10, 20])
    assert rep.kind == "atom-index"
    assert rep.tail_mass[-1] < 1e-4
    assert rep.tail_mass == sorted(rep.tail_mass, reverse=True)


def test_cesaro_gap(prdm):
    assert cesaro_gap(prdm, 0.7, 100_000, RngStream(13)) < 0.02


def test_phi_cylinder_against_exact(dmse):
    word = ("c", "d", "d")
    exact = float(cylinder_prob(F(3, 5), word, dmse))
    est, se = phi_cylinder_estimate(dmse, F(3, 5), word, 40_000, RngStream(14))
    assert abs(est - exact) <= 4 * se + 1e-3


@pytest.mark.parametrize("n", [1, 3, 8])
def test_un_L_exact_prdm(prdm, n):
    val, se = un_L(prdm, F(7, 10), n)
    assert se == 0.0
    assert val <= 0.5 ** n * 0.2 + 0.5


def test_un_L_monte_carlo_fallback(prdm):
    exact, _ = un_L(prdm, F(7, 10), 6)
    val, se = un_L(prdm, F(7, 10), 6, RngStream(2), max_support=4)
    assert se > 0
    assert abs(val - exact) <= 4 * se


def test_rescaled_tail_is_tight():
    system = build(catalog.ieex(n_max=10 ** 5, slope_scale="1/4"))
    rep = occupation_tightness(system, 0, 50_000, RngStream(15))
    assert rep.kind == "state"
    assert rep.verdict == "empirically tight"


def test_original_tail_diverges():
    system = build(catalog.ieex(n_max=10 ** 5))
    with pytest.raises(DivergenceError):
        run(system, 0, 100_000, 0, RngStream(42), reservoir=0, keep_trajectory=False)


def test_tail_moments_used_by_U():
    system = build(catalog.ieex(n_max=10 ** 4, slope_scale="1/4"))
    xs = np.array([0.0, 1.0, -2.0])
    assert np.all(np.isfinite(apply_U(system, "x2", xs)))
    with pytest.raises(ValueError, match="named test functions"):
        apply_U(system, np.sin, xs)


def test_histogram_rows(prdm):
    m, _ = run(prdm, 0.7, 10_000, 0, RngStream(1), keep_trajectory=False)
    rows = m.histogram_rows()
    assert [r[0] for r in rows] == ["1", "2", "3"]
    assert sum(r[1] for r in rows) == 10_000
    assert math.isclose(sum(r[2] for r in rows), 1.0)
