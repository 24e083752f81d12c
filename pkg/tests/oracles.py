"""Independent reference computations used by the tests.

These work directly from the raw JSON dictionaries with plain floats or
Fractions, without going through the package's Affine/Interval machinery.
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np


def _aff(d, x):
    return Fraction(d["slope"]) * x + Fraction(d["intercept"])


def _atom_points(atom, k=400):
    if atom.get("kind") == "point":
        return [Fraction(atom["at"])]
    lo, hi = Fraction(atom["lo"]), Fraction(atom["hi"])
    # interior grid plus the endpoints of the closure (suprema of affine functions)
    return [lo + (hi - lo) * Fraction(j, k) for j in range(k + 1)]


def contraction_rate(doc) -> Fraction:
    """max over atoms and a fine grid of sum_e p_e(x) |slope_e|."""
    best = Fraction(0)
    for atom in doc["atoms"]:
        out = [e for e in doc["edges"] if str(e["from"]) == str(atom["id"])]
        for x in _atom_points(atom):
            best = max(best, sum(_aff(e["prob"], x) * abs(Fraction(e["map"]["slope"])) for e in out))
    return best


def boundary_R1(doc) -> dict:
    """(R1)(z) straight from the definition: sum of closure-extended p_e over open endpoints."""
    out: dict[Fraction, Fraction] = {}
    for atom in doc["atoms"]:
        if atom.get("kind") == "point":
            continue
        ends = []
        if not atom.get("lo_closed", False):
            ends.append(Fraction(atom["lo"]))
        if not atom.get("hi_closed", False):
            ends.append(Fraction(atom["hi"]))
        for z in ends:
            for e in doc["edges"]:
                if str(e["from"]) == str(atom["id"]):
                    out[z] = out.get(z, Fraction(0)) + _aff(e["prob"], z)
    return {z: v for z, v in out.items() if v}


def stationary_numpy(P) -> np.ndarray:
    """Left Perron eigenvector by numpy, normalised."""
    w, v = np.linalg.eig(np.asarray(P, dtype=float).T)
    k = int(np.argmin(np.abs(w - 1)))
    pi = np.real(v[:, k])
    return pi / pi.sum()


def entropy_rate(P) -> float:
    P = np.asarray(P, dtype=float)
    pi = stationary_numpy(P)
    return float(-sum(pi[i] * P[i, j] * math.log(P[i, j]) for i in range(len(P)) for j in range(len(P))
                      if P[i, j] > 0))


def halving_moments() -> tuple[Fraction, Fraction]:
    """Stationary E X and E X^2 for the halving maps with p0 = x by the moment recursion.

    E[X'|x] = 1/2 and E[X'^2|x] = (1 + x - x^2)/4, so m1 = 1/2 and m2 = (1 + m1 - m2)/4.
    """
    m1 = Fraction(1, 2)
    m2 = (1 + m1) / 5
    return m1, m2
