"""Reference systems used by the tests, the acceptance suite and ``cms @name``.

All builders return JSON-ready dictionaries in the interval or subshift schema.
"""
from __future__ import annotations

from fractions import Fraction
from typing import Callable, Sequence

HALF = "1/2"
W0 = {"slope": HALF, "intercept": "0"}  # x -> x/2
W1 = {"slope": HALF, "intercept": HALF}  # x -> 1/2 + x/2
X = {"slope": "1", "intercept": "0"}  # x
ONE_MINUS_X = {"slope": "-1", "intercept": "1"}  # 1 - x


def _unit_three_atoms() -> list[dict]:
    return [
        {"id": 1, "kind": "point", "at": "0"},
        {"id": 2, "kind": "interval", "lo": "0", "hi": "1", "lo_closed": False, "hi_closed": False},
        {"id": 3, "kind": "point", "at": "1"},
    ]


def _edge(eid: str, src, m: dict, p: dict, group: str | None = None) -> dict:
    d = {"id": eid, "from": src, "map": dict(m), "prob": dict(p)}
    if group is not None:
        d["group"] = group
    return d


def prdm() -> dict:
    """Halving maps, p0 = x, p1 = 1 - x, with both endpoints split off."""
    return {
        "name": "prdm", "backend": "interval", "space": {"lo": "0", "hi": "1"},
        "atoms": _unit_three_atoms(), "anchors": {"2": HALF},
        "edges": [
            _edge("a", 1, W1, ONE_MINUS_X, "w1"),
            _edge("b", 2, W0, X, "w0"),
            _edge("c", 2, W1, ONE_MINUS_X, "w1"),
            _edge("d", 3, W0, X, "w0"),
        ],
    }


def dmse() -> dict:
    """Halving maps with p0 = 1 - x, p1 = x: both endpoints are absorbing."""
    return {
        "name": "dMse", "backend": "interval", "space": {"lo": "0", "hi": "1"},
        "atoms": _unit_three_atoms(), "anchors": {"2": HALF},
        "edges": [
            _edge("a", 1, W0, ONE_MINUS_X, "w0"),
            _edge("b", 2, W0, ONE_MINUS_X, "w0"),
            _edge("c", 2, W1, X, "w1"),
            _edge("d", 3, W1, X, "w1"),
        ],
    }


def gnce() -> dict:
    """dMse with an even split of the mass at 0: the R-kernel there is not dominated."""
    return {
        "name": "gnce", "backend": "interval", "space": {"lo": "0", "hi": "1"},
        "atoms": _unit_three_atoms(), "anchors": {"2": HALF},
        "edges": [
            _edge("a", 1, W0, {"slope": "0", "intercept": HALF}, "w0"),
            _edge("b", 2, W0, ONE_MINUS_X, "w0"),
            _edge("c", 2, W1, X, "w1"),
            _edge("d", 3, W1, X, "w1"),
            _edge("e", 1, W1, {"slope": "0", "intercept": HALF}, "w1"),
        ],
    }


def mcae(n: int, a: Sequence) -> dict:
    """Halving maps, p0 piecewise constant a_i on the dyadic intervals [i/2^n, (i+1)/2^n)."""
    m = 2 ** n
    if len(a) != m:
        raise ValueError(f"need {m} coefficients")
    coef = [Fraction(x) for x in a]
    if any(not (0 <= c <= 1) for c in coef):
        raise ValueError("coefficients must lie in [0, 1]")
    atoms = [{"id": k, "kind": "interval", "lo": str(Fraction(k, m)), "hi": str(Fraction(k + 1, m)),
              "lo_closed": True, "hi_closed": False} for k in range(m)]
    atoms.append({"id": m, "kind": "point", "at": "1"})
    edges = []
    for k in range(m + 1):
        ck = coef[min(k, m - 1)]
        if ck > 0:
            edges.append(_edge(f"0:{k}", k, W0, {"slope": "0", "intercept": str(ck)}))
        if ck < 1:
            edges.append(_edge(f"1:{k}", k, W1, {"slope": "0", "intercept": str(1 - ck)}))
    return {"name": f"mcae(n={n})", "backend": "interval", "space": {"lo": "0", "hi": "1"},
            "atoms": atoms, "edges": edges}


def prdm_dyadic(levels: int = 24) -> dict:
    """prdm on the partition {0}, {1}, (0,1/2], (1/2,3/4], ... truncated after ``levels`` atoms.

    Atom k >= 2 is (1 - 2^-(k-2), 1 - 2^-(k-1)]; the last one is left open at 1.
    """
    if levels < 3:
        raise ValueError("need at least three interval atoms")
    atoms = [{"id": 1, "kind": "point", "at": "0"}, {"id": 0, "kind": "point", "at": "1"}]
    for k in range(2, levels + 2):
        lo = 1 - Fraction(1, 2 ** (k - 2)) if k > 2 else Fraction(0)
        last = k == levels + 1
        hi = Fraction(1) if last else 1 - Fraction(1, 2 ** (k - 1))
        atoms.append({"id": k, "kind": "interval", "lo": str(lo), "hi": str(hi), "lo_closed": False,
                      "hi_closed": not last})
    edges = [_edge("a", 1, W1, ONE_MINUS_X, "w1"), _edge("d", 0, W0, X, "w0")]
    for k in range(2, levels + 2):
        edges.append(_edge(f"b{k}", k, W0, X, "w0"))
        edges.append(_edge(f"c{k}", k, W1, ONE_MINUS_X, "w1"))
    return {"name": f"prdm-dyadic({levels})", "backend": "interval", "space": {"lo": "0", "hi": "1"},
            "atoms": atoms, "edges": edges}


def ieex(n_max: int = 10 ** 6, slope_scale: str = "1") -> dict:
    """Countable family w_n(x) = Z sqrt(log 2) sqrt(log n) x + 1, p_n = 1/(Z n log(n)^2), n >= 3.

    ``slope_scale`` multiplies every slope; ``"1"`` is the family as written.
    """
    scale = f"({slope_scale})*" if slope_scale != "1" else ""
    return {
        "name": "ieex" if slope_scale == "1" else f"ieex(slope x {slope_scale})",
        "backend": "interval", "space": {"lo": "-inf", "hi": "inf"},
        "atoms": [{"id": 1, "kind": "interval", "lo": "-inf", "hi": "inf"}],
        "anchors": {"1": "0"}, "edges": [],
        "tail_family": {
            "from": 1, "to": 1, "n0": 3, "n_max": n_max,
            "weight": "1/(n*log(n)**2)",
            "tail_weight": "1/log(M)",
            "slope": f"{scale}Z*sqrt(log(2))*sqrt(log(n))",
            "intercept": "1",
            "tail_slope_weight": f"{scale}Z*sqrt(log(2))*2/sqrt(log(M))",
        },
    }


def gmc(rows: Sequence[Sequence] = (("3/10", "7/10"), ("3/5", "2/5"))) -> dict:
    """Memory-1 g-function on the full two-vertex graph (a Markov chain on edges)."""
    k = len(rows)
    verts = [str(i + 1) for i in range(k)]
    edges, table = [], {}
    for i in range(k):
        for j in range(k):
            eid = f"e{i + 1}{j + 1}"
            edges.append({"id": eid, "from": verts[i], "to": verts[j]})
            table[eid] = str(Fraction(rows[i][j]))
    return {"name": "gmc", "backend": "subshift", "graph": {"vertices": verts, "edges": edges},
            "g": {"memory": 1, "table": table}}


BUILTINS: dict[str, Callable[[], dict]] = {
    "prdm": prdm,
    "dmse": dmse,
    "gnce": gnce,
    "mcae": lambda: mcae(1, ["1/3", "2/3"]),
    "prdm-dyadic": prdm_dyadic,
    "ieex": ieex,
    "gmc": gmc,
}


def builtin(name: str) -> dict:
    try:
        return BUILTINS[name.lower()]()
    except KeyError:
        raise KeyError(f"unknown built-in system {name!r}; choose from {sorted(BUILTINS)}") from None
