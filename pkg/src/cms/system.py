"""Markov systems on interval partitions: parsing, validation and exact geometry.

Every coefficient is held as a ``fractions.Fraction``.  Unbounded interval
endpoints are represented by ``math.inf`` / ``-math.inf``; they are only
permitted on the state space and on atoms, never on maps or probabilities.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping

Number = Fraction  # exact scalar used throughout
Endpoint = Fraction | float  # float only for +/- inf


class SpecError(ValueError):
    """Raised for malformed or invalid system descriptions."""


# ---------------------------------------------------------------------------
# scalars


def to_rational(value: Any, *, allow_inf: bool = False, what: str = "value") -> Endpoint:
    """Parse an integer, ``"p/q"`` string or decimal string into a Fraction."""
    if isinstance(value, bool):
        raise SpecError(f"{what}: booleans are not numbers")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if math.isinf(value) and allow_inf:
            return value
        if not math.isfinite(value):
            raise SpecError(f"{what}: non-finite number {value!r}")
        return Fraction(value)
    if isinstance(value, str):
        s = value.strip()
        low = s.lower()
        if low in ("inf", "+inf", "infinity", "+infinity", "-inf", "-infinity"):
            if not allow_inf:
                raise SpecError(f"{what}: infinite value not allowed here")
            return -math.inf if low.startswith("-") else math.inf
        try:
            return Fraction(s)
        except ZeroDivisionError:
            raise SpecError(f"{what}: zero denominator in {value!r}") from None
        except ValueError:
            raise SpecError(f"{what}: cannot parse {value!r} as a rational") from None
    raise SpecError(f"{what}: cannot parse {value!r} as a rational")


def fmt(x: Endpoint | None) -> str:
    """Render a rational (or infinity) the way reports and JSON expect."""
    if x is None:
        return "undefined"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    return str(x)


# ---------------------------------------------------------------------------
# affine pieces


@dataclass(frozen=True)
class Affine:
    """x -> slope * x + intercept, exact."""

    slope: Fraction
    intercept: Fraction

    def __call__(self, x: Endpoint) -> Endpoint:
        if isinstance(x, float) and math.isinf(x):
            if self.slope == 0:
                return self.intercept
            return x if self.slope > 0 else -x
        return self.slope * x + self.intercept

    def compose(self, inner: "Affine") -> "Affine":
        """Return self o inner."""
        return Affine(self.slope * inner.slope, self.slope * inner.intercept + self.intercept)

    def fixed_point(self) -> Fraction:
        if self.slope == 1:
            raise ValueError("affine map with slope 1 has no unique fixed point")
        return self.intercept / (1 - self.slope)

    @property
    def lipschitz(self) -> Fraction:
        return abs(self.slope)

    def as_float(self) -> tuple[float, float]:
        return float(self.slope), float(self.intercept)

    def to_json(self) -> dict:
        return {"slope": str(self.slope), "intercept": str(self.intercept)}


AffineMap = Affine
AffineProb = Affine

IDENTITY = Affine(Fraction(1), Fraction(0))


@dataclass(frozen=True)
class Interval:
    lo: Endpoint
    hi: Endpoint
    lo_closed: bool
    hi_closed: bool

    @classmethod
    def point(cls, at: Fraction) -> "Interval":
        return cls(at, at, True, True)

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def bounded(self) -> bool:
        return not (isinstance(self.lo, float) or isinstance(self.hi, float))

    def contains(self, x: Endpoint) -> bool:
        if x < self.lo or x > self.hi:
            return False
        if x == self.lo and not self.lo_closed:
            return False
        if x == self.hi and not self.hi_closed:
            return False
        return True

    def subset_of(self, other: "Interval") -> bool:
        lo_ok = other.lo < self.lo or (other.lo == self.lo and (other.lo_closed or not self.lo_closed))
        hi_ok = other.hi > self.hi or (other.hi == self.hi and (other.hi_closed or not self.hi_closed))
        return lo_ok and hi_ok

    def boundary(self) -> list[Fraction]:
        """Points of the closure that are not in the interval."""
        out = []
        if not self.is_point:
            if not self.lo_closed and not isinstance(self.lo, float):
                out.append(self.lo)
            if not self.hi_closed and not isinstance(self.hi, float):
                out.append(self.hi)
        return out

    def in_closure(self, x: Endpoint) -> bool:
        return self.lo <= x <= self.hi

    def finite_endpoints(self) -> list[Fraction]:
        return [e for e in (self.lo, self.hi) if not isinstance(e, float)]

    def image(self, m: Affine) -> "Interval":
        if m.slope == 0:
            return Interval.point(m.intercept)
        a, b = m(self.lo), m(self.hi)
        if m.slope > 0:
            return Interval(a, b, self.lo_closed, self.hi_closed)
        return Interval(b, a, self.hi_closed, self.lo_closed)

    def midpoint(self) -> Fraction:
        if not self.bounded:
            if isinstance(self.lo, float) and isinstance(self.hi, float):
                return Fraction(0)
            if isinstance(self.lo, float):
                return self.hi - 1
            return self.lo + 1
        return (self.lo + self.hi) / 2

    def __str__(self) -> str:
        if self.is_point:
            return "{" + fmt(self.lo) + "}"
        left = "[" if self.lo_closed else "("
        right = "]" if self.hi_closed else ")"
        return f"{left}{fmt(self.lo)}, {fmt(self.hi)}{right}"


def affine_sup(f: Affine, iv: Interval) -> Endpoint:
    """Supremum of an affine function over an interval (may be inf)."""
    if f.slope == 0:
        return f.intercept
    return max(f(iv.lo), f(iv.hi))


def affine_inf(f: Affine, iv: Interval) -> Endpoint:
    if f.slope == 0:
        return f.intercept
    return min(f(iv.lo), f(iv.hi))


# ---------------------------------------------------------------------------
# system objects


@dataclass(frozen=True)
class Atom:
    id: str
    interval: Interval

    @property
    def kind(self) -> str:
        return "point" if self.interval.is_point else "interval"

    def contains(self, x: Endpoint) -> bool:
        return self.interval.contains(x)

    def to_json(self) -> dict:
        iv = self.interval
        if iv.is_point:
            return {"id": self.id, "kind": "point", "at": fmt(iv.lo)}
        return {"id": self.id, "kind": "interval", "lo": fmt(iv.lo), "hi": fmt(iv.hi),
                "lo_closed": iv.lo_closed, "hi_closed": iv.hi_closed}


@dataclass(frozen=True)
class Edge:
    id: str
    source: str
    map: Affine
    prob: Affine
    target: str | None = None
    group: str | None = None

    def to_json(self) -> dict:
        d = {"id": self.id, "from": self.source, "map": self.map.to_json(), "prob": self.prob.to_json()}
        if self.group is not None:
            d["group"] = self.group
        return d


@dataclass
class TailSpec:
    """Raw description of a countable edge family attached to one atom."""

    source: str
    target: str | None
    n0: int
    n_max: int
    weight: str
    tail_weight: str
    slope: str
    intercept: str
    tail_slope_weight: str | None = None
    prefix: str = "n"

    def to_json(self) -> dict:
        d = {"from": self.source, "n0": self.n0, "n_max": self.n_max, "weight": self.weight,
             "tail_weight": self.tail_weight, "slope": self.slope, "intercept": self.intercept,
             "prefix": self.prefix}
        if self.target is not None:
            d["to"] = self.target
        if self.tail_slope_weight is not None:
            d["tail_slope_weight"] = self.tail_slope_weight
        return d


@dataclass
class SystemSpec:
    """Parsed but not yet validated description."""

    backend: str
    space: Interval | None = None
    atoms: list[Atom] = field(default_factory=list)
    anchors: dict[str, Fraction] = field(default_factory=dict)
    edges: list[Edge] = field(default_factory=list)
    tail: TailSpec | None = None
    subshift: Any = None  # subshift.ShiftSpec
    name: str | None = None
    raw: dict | None = None

    def to_json(self) -> dict:
        if self.raw is not None:
            return self.raw
        return spec_to_json(self)


@dataclass(frozen=True)
class ValidatedSystem:
    backend: str
    atoms: tuple[Atom, ...]
    edges: tuple[Edge, ...]
    anchors: Mapping[str, Fraction]
    space: Interval | None = None
    tail: Any = None  # tails.TruncatedTail
    subshift: Any = None  # subshift.SubshiftSystem
    name: str | None = None
    partial: bool = False  # True for restrictions that need not cover the space

    def __post_init__(self) -> None:
        object.__setattr__(self, "_atom_index", {a.id: a for a in self.atoms})
        by_src: dict[str, list[Edge]] = {a.id: [] for a in self.atoms}
        for e in self.edges:
            by_src[e.source].append(e)
        object.__setattr__(self, "_by_source", {k: tuple(v) for k, v in by_src.items()})

    def atom(self, atom_id: str) -> Atom:
        return self._atom_index[atom_id]

    def edges_from(self, atom_id: str) -> tuple[Edge, ...]:
        return self._by_source[atom_id]

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    @property
    def atom_ids(self) -> list[str]:
        return [a.id for a in self.atoms]

    def atom_of(self, x: Endpoint) -> str:
        return atom_of(x, self)

    def to_json(self) -> dict:
        return spec_to_json(self)


# ---------------------------------------------------------------------------
# parsing


def _atom_id(v: Any) -> str:
    if isinstance(v, bool) or not isinstance(v, (int, str)):
        raise SpecError(f"atom id must be an integer or string, got {v!r}")
    return str(v)


def _affine(obj: Any, what: str) -> Affine:
    if not isinstance(obj, Mapping):
        raise SpecError(f"{what}: expected an object with slope and intercept")
    unknown = set(obj) - {"slope", "intercept"}
    if unknown:
        raise SpecError(f"{what}: unknown keys {sorted(unknown)}")
    return Affine(to_rational(obj.get("slope", 0), what=f"{what}.slope"),
                  to_rational(obj.get("intercept", 0), what=f"{what}.intercept"))


def _interval_atom(obj: Mapping) -> Atom:
    aid = _atom_id(obj.get("id"))
    kind = obj.get("kind", "interval")
    if kind == "point":
        at = to_rational(obj.get("at"), what=f"atom {aid}.at")
        return Atom(aid, Interval.point(at))
    if kind != "interval":
        raise SpecError(f"atom {aid}: unknown kind {kind!r}")
    lo = to_rational(obj.get("lo"), allow_inf=True, what=f"atom {aid}.lo")
    hi = to_rational(obj.get("hi"), allow_inf=True, what=f"atom {aid}.hi")
    lo_c = bool(obj.get("lo_closed", False)) and not isinstance(lo, float)
    hi_c = bool(obj.get("hi_closed", False)) and not isinstance(hi, float)
    if not lo < hi:
        raise SpecError(f"atom {aid}: empty interval (lo={fmt(lo)}, hi={fmt(hi)})")
    return Atom(aid, Interval(lo, hi, lo_c, hi_c))


def parse_spec(document: str | bytes | Mapping) -> SystemSpec:
    """Parse a JSON document (text or already-decoded mapping)."""
    if isinstance(document, (str, bytes)):
        try:
            data = json.loads(document)
        except json.JSONDecodeError as exc:
            raise SpecError(f"invalid JSON: {exc}") from None
    else:
        data = dict(document)
    if not isinstance(data, Mapping):
        raise SpecError("top level must be a JSON object")
    backend = data.get("backend", "interval")
    if backend == "subshift":
        from .subshift import parse_shift

        spec = SystemSpec(backend="subshift", subshift=parse_shift(data), name=data.get("name"))
        spec.raw = dict(data)
        return spec
    if backend != "interval":
        raise SpecError(f"unknown backend {backend!r}")

    space_obj = data.get("space") or {}
    lo = to_rational(space_obj.get("lo", 0), allow_inf=True, what="space.lo")
    hi = to_rational(space_obj.get("hi", 1), allow_inf=True, what="space.hi")
    if not lo < hi:
        raise SpecError("space: lo must be below hi")
    space = Interval(lo, hi, not isinstance(lo, float), not isinstance(hi, float))

    atoms = [_interval_atom(a) for a in data.get("atoms", [])]
    if not atoms:
        raise SpecError("system has no atoms")
    seen: set[str] = set()
    for a in atoms:
        if a.id in seen:
            raise SpecError(f"duplicate atom id {a.id!r}")
        seen.add(a.id)

    anchors = {}
    for k, v in (data.get("anchors") or {}).items():
        anchors[_atom_id(k)] = to_rational(v, what=f"anchor {k}")

    edges = []
    eids: set[str] = set()
    for obj in data.get("edges", []):
        eid = str(obj.get("id"))
        if eid in eids:
            raise SpecError(f"duplicate edge id {eid!r}")
        eids.add(eid)
        if "from" not in obj:
            raise SpecError(f"edge {eid}: missing 'from'")
        group = obj.get("group")
        edges.append(Edge(eid, _atom_id(obj["from"]), _affine(obj.get("map"), f"edge {eid}.map"),
                          _affine(obj.get("prob"), f"edge {eid}.prob"),
                          _atom_id(obj["to"]) if "to" in obj else None,
                          None if group is None else str(group)))

    tail = None
    if data.get("tail_family"):
        t = data["tail_family"]
        try:
            tail = TailSpec(source=_atom_id(t["from"]), target=_atom_id(t["to"]) if "to" in t else None,
                            n0=int(t.get("n0", 1)), n_max=int(t["n_max"]), weight=str(t["weight"]),
                            tail_weight=str(t["tail_weight"]), slope=str(t["slope"]),
                            intercept=str(t.get("intercept", "0")),
                            tail_slope_weight=t.get("tail_slope_weight"), prefix=str(t.get("prefix", "n")))
        except KeyError as exc:
            raise SpecError(f"tail_family: missing key {exc.args[0]!r}") from None
    if not edges and tail is None:
        raise SpecError("system has no edges")
    spec = SystemSpec("interval", space, atoms, anchors, edges, tail, name=data.get("name"))
    spec.raw = dict(data)
    return spec


def spec_to_json(s: SystemSpec | ValidatedSystem) -> dict:
    if s.backend == "subshift":
        from .subshift import shift_to_json

        return shift_to_json(s.subshift)
    sp = s.space
    out: dict[str, Any] = {"backend": "interval"}
    if s.name:
        out["name"] = s.name
    if sp is not None:
        out["space"] = {"lo": fmt(sp.lo), "hi": fmt(sp.hi)}
    out["atoms"] = [a.to_json() for a in s.atoms]
    out["anchors"] = {k: str(v) for k, v in s.anchors.items()}
    out["edges"] = [e.to_json() for e in s.edges]
    tail = s.tail
    if tail is not None:
        out["tail_family"] = tail.to_json() if isinstance(tail, TailSpec) else tail.spec.to_json()
    return out


def load_spec(path: str) -> SystemSpec:
    from .catalog import builtin

    if path.startswith("@"):
        try:
            return parse_spec(builtin(path[1:]))
        except KeyError as exc:
            raise SpecError(exc.args[0]) from None
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_spec(fh.read())
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None


# ---------------------------------------------------------------------------
# validation


def _check_partition(space: Interval, atoms: Iterable[Atom]) -> None:
    order = sorted(atoms, key=lambda a: (a.interval.lo, 0 if a.interval.lo_closed else 1))
    cur = space.lo
    covered = not space.lo_closed  # whether the point `cur` is already accounted for
    prev: Atom | None = None
    for a in order:
        iv = a.interval
        if iv.lo < cur or (iv.lo == cur and iv.lo_closed and covered):
            if iv.lo == cur or iv.lo_closed:
                w = iv.lo
            else:
                w = (iv.lo + min(cur, iv.hi)) / 2
            other = prev.id if prev else "space boundary"
            raise SpecError(f"atoms overlap: {other} and {a.id} both contain {fmt(w)}")
        if iv.lo > cur or (iv.lo == cur and not iv.lo_closed and not covered):
            gap = Interval(cur, iv.lo, not covered, not iv.lo_closed)
            raise SpecError(f"atoms leave a gap {gap} before atom {a.id}")
        if iv.hi > cur or (iv.hi == cur and iv.hi_closed):
            cur, covered = iv.hi, iv.hi_closed
        prev = a
    if cur > space.hi or (cur == space.hi and covered and not space.hi_closed):
        raise SpecError(f"atom {prev.id if prev else '?'} extends beyond the state space {space}")
    if cur < space.hi or (cur == space.hi and space.hi_closed and not covered):
        gap = Interval(cur, space.hi, not covered, space.hi_closed)
        raise SpecError(f"atoms leave a gap {gap} at the end of the state space")
    for a in atoms:
        if not a.interval.subset_of(space):
            raise SpecError(f"atom {a.id} lies outside the state space {space}")


def _straddle_witness(img: Interval, atoms: Iterable[Atom], space: Interval | None) -> str:
    pts = sorted({p for a in atoms for p in a.interval.finite_endpoints() if img.lo < p < img.hi})
    if pts:
        return fmt(pts[0])
    if space is not None and not img.subset_of(space):
        return fmt(space.lo if img.lo <= space.lo else space.hi)
    return fmt(img.lo)


def resolve_target(img: Interval, atoms: Iterable[Atom]) -> str | None:
    for a in atoms:
        if img.subset_of(a.interval):
            return a.id
    return None


def validate(spec: SystemSpec) -> ValidatedSystem:
    """Check the partition, Markov property and stochasticity; fill default anchors."""
    if spec.backend == "subshift":
        from .subshift import validate_shift

        return ValidatedSystem("subshift", (), (), {}, subshift=validate_shift(spec.subshift), name=spec.name)
    atoms = list(spec.atoms)
    _check_partition(spec.space, atoms)
    index = {a.id: a for a in atoms}

    anchors: dict[str, Fraction] = {}
    for a in atoms:
        if a.id in spec.anchors:
            x = spec.anchors[a.id]
            if not a.contains(x):
                raise SpecError(f"anchor {fmt(x)} is not in atom {a.id} {a.interval}")
            anchors[a.id] = x
        else:
            anchors[a.id] = a.interval.lo if a.interval.is_point else a.interval.midpoint()
    for k in spec.anchors:
        if k not in index:
            raise SpecError(f"anchor given for unknown atom {k!r}")

    edges = []
    for e in spec.edges:
        if e.source not in index:
            raise SpecError(f"edge {e.id}: unknown source atom {e.source!r}")
        iv = index[e.source].interval
        for bound, label in ((affine_inf(e.prob, iv), "below 0"), (affine_sup(e.prob, iv), "above 1")):
            if isinstance(bound, float):
                raise SpecError(f"edge {e.id}: probability is unbounded on atom {e.source}")
        if affine_inf(e.prob, iv) < 0:
            raise SpecError(f"edge {e.id}: probability takes negative values on atom {e.source}")
        if affine_sup(e.prob, iv) > 1:
            raise SpecError(f"edge {e.id}: probability exceeds 1 on atom {e.source}")
        if iv.is_point:
            if e.prob(iv.lo) == 0:
                raise SpecError(f"edge {e.id}: probability is identically zero on atom {e.source}")
        elif e.prob.slope == 0 and e.prob.intercept == 0:
            raise SpecError(f"edge {e.id}: probability is identically zero on atom {e.source}")
        img = iv.image(e.map)
        tgt = resolve_target(img, atoms)
        if tgt is None:
            if not img.subset_of(spec.space):
                raise SpecError(f"edge {e.id}: image {img} leaves the state space")
            raise SpecError(f"edge {e.id}: image {img} straddles atom boundary at "
                            f"{_straddle_witness(img, atoms, spec.space)}")
        if e.target is not None and e.target != tgt:
            raise SpecError(f"edge {e.id}: declared target {e.target} but image {img} lies in atom {tgt}")
        edges.append(Edge(e.id, e.source, e.map, e.prob, tgt, e.group))

    tail = None
    if spec.tail is not None:
        from .tails import build_tail

        tail = build_tail(spec.tail, index, atoms)
        if any(e.source == spec.tail.source for e in edges):
            raise SpecError("a tail family's atom must not also carry explicit edges")

    for a in atoms:
        out = [e for e in edges if e.source == a.id]
        if tail is not None and tail.source == a.id:
            continue
        if not out:
            raise SpecError(f"atom {a.id} has no outgoing edges")
        iv = a.interval
        if iv.is_point:
            total = sum((e.prob(iv.lo) for e in out), Fraction(0))
            if total != 1:
                raise SpecError(f"probabilities on atom {a.id} sum to {total}, not 1")
        else:
            s = sum((e.prob.slope for e in out), Fraction(0))
            c = sum((e.prob.intercept for e in out), Fraction(0))
            if s != 0 or c != 1:
                raise SpecError(f"probabilities on atom {a.id} sum to {s}*x + {c}, not 1 "
                                f"(residual {s}*x + {c - 1})")
    return ValidatedSystem("interval", tuple(atoms), tuple(edges), anchors, spec.space, tail, name=spec.name)


def load_system(path: str) -> ValidatedSystem:
    return validate(load_spec(path))


def atom_of(x: Endpoint, system: ValidatedSystem) -> str:
    """Exact atom lookup; raises ValueError for points outside the state space."""
    if not isinstance(x, Fraction):
        x = to_rational(x)
    for a in system.atoms:
        if a.contains(x):
            return a.id
    raise ValueError(f"point {fmt(x)} is outside the state space")


def prob_at(edge: Edge, x: Endpoint, system: ValidatedSystem) -> Fraction:
    """p_e(x), taken as zero off the source atom."""
    if not system.atom(edge.source).contains(x):
        return Fraction(0)
    return edge.prob(x)
