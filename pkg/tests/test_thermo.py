from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from cms import catalog
from cms.simulation import RngStream, run
from cms.subshift import entropy_rate_exact, parse_shift, validate_shift
from cms.thermo import (ReducibleChainError, block_entropy, energy_average, free_energy_residual,
                        markov_stationary_oracle, mismatched, residual_profile, run_subshift, vertex_occupation)

import oracles
from conftest import build

F = Fraction


@pytest.fixture(scope="module")
def gmc_traj(gmc):
    return run_subshift(gmc.subshift, 300_000, RngStream(21), burn_in=1000)


def test_stationary_exact(gmc):
    pi = markov_stationary_oracle(gmc.subshift.transition_matrix())
    assert pi == {"1": F(6, 13), "2": F(7, 13)}
    assert np.allclose([float(pi["1"]), float(pi["2"])], oracles.stationary_numpy([[0.3, 0.7], [0.6, 0.4]]))


def test_stationary_three_states():
    P = {"a": {"a": F(1, 2), "b": F(1, 2)}, "b": {"c": F(1)}, "c": {"a": F(1, 3), "c": F(2, 3)}}
    pi = markov_stationary_oracle(P)
    num = oracles.stationary_numpy([[0.5, 0.5, 0], [0, 0, 1], [1 / 3, 0, 2 / 3]])
    assert np.allclose([float(pi[s]) for s in "abc"], num)
    assert sum(pi.values()) == 1


def test_reducible_chain_rejected():
    P = {"a": {"a": F(1)}, "b": {"a": F(1, 2), "b": F(1, 2)}, "c": {"c": F(1)}}
    with pytest.raises(ReducibleChainError) as info:
        markov_stationary_oracle(P)
    assert sorted(map(sorted, info.value.classes)) == [["a"], ["c"]]


def test_row_sum_checked():
    with pytest.raises(ValueError, match="sums to"):
        markov_stationary_oracle({"a": {"a": F(1, 2)}})


def test_entropy_rate(gmc):
    pi = markov_stationary_oracle(gmc.subshift.transition_matrix())
    h = entropy_rate_exact(gmc.subshift, pi)
    assert h == pytest.approx(oracles.entropy_rate([[0.3, 0.7], [0.6, 0.4]]), rel=1e-12)
    assert h == pytest.approx(0.6443, abs=1e-4)


def test_occupation_matches_oracle(gmc, gmc_traj):
    occ = vertex_occupation(gmc_traj, gmc.subshift)
    assert abs(occ["1"] - 6 / 13) < 0.01


def test_equilibrium_residual(gmc_traj):
    rep = free_energy_residual(gmc_traj, 1)
    assert abs(rep.residual) <= 0.01
    assert rep.H_m == pytest.approx(0.6443, abs=0.01)
    assert rep.u_avg == pytest.approx(-0.6443, abs=0.01)


def test_mismatched_energy_gives_negative_residual(gmc_traj):
    other = validate_shift(parse_shift(catalog.gmc((("1/2", "1/2"), ("1/2", "1/2")))))
    rep = free_energy_residual(mismatched(gmc_traj, other), 1)
    assert rep.residual < -0.02
    assert rep.verdict.startswith("strict inequality")


def test_residual_profile_monotone(gmc_traj):
    prof = residual_profile(gmc_traj, [0, 1, 2, 3])
    H = [r.H_m for r in prof]
    assert all(b <= a + 1e-12 for a, b in zip(H, H[1:]))


def test_block_entropy_iid():
    rng = np.random.default_rng(0)
    e = rng.integers(0, 4, 200_000)
    assert block_entropy(e, 0) == pytest.approx(math.log(4), abs=1e-3)
    assert block_entropy(e, 2) == pytest.approx(math.log(4), abs=5e-3)
    with pytest.raises(ValueError):
        block_entropy(e[:2], 3)


def test_memory_two_residual():
    doc = {"backend": "subshift",
           "graph": {"vertices": ["v"], "edges": [{"id": "0", "from": "v", "to": "v"},
                                                  {"id": "1", "from": "v", "to": "v"}]},
           "g": {"memory": 2, "table": {"0,0": "9/10", "0,1": "1/10", "1,0": "1/2", "1,1": "1/2"}}}
    system = build(doc).subshift
    tr = run_subshift(system, 200_000, RngStream(4), burn_in=100)
    assert abs(free_energy_residual(tr, 1).residual) <= 0.01
    assert free_energy_residual(tr, 0).residual > 0.02  # too little memory overstates entropy


def test_energy_average_interval_system(prdm):
    _, tr = run(prdm, 0.7, 300_000, 1000, RngStream(8))
    assert energy_average(tr) < 0
    # p depends on the whole past, so short memories overstate the entropy
    prof = [r.residual for r in residual_profile(tr, [0, 1, 2, 4])]
    assert prof[0] > prof[1] > prof[2] > 0
    assert abs(prof[3]) < 2e-3


def test_infinite_entropy_flag_on_tail_family():
    system = build(catalog.ieex(n_max=10 ** 6, slope_scale="1/4"))
    _, tr = run(system, 0, 60_000, 0, RngStream(3), reservoir=0)
    rep = free_energy_residual(tr, 0)
    assert rep.entropy_possibly_infinite
    assert "inapplicable" in rep.verdict


def test_empty_trajectory_rejected(gmc):
    with pytest.raises(ValueError):
        run_subshift(gmc.subshift, 10, RngStream(0), burn_in=10)
