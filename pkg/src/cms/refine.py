"""Refining a partition by cutting atoms, and checks that the refinement codes the same dynamics."""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from .coding import EventuallyPeriodicWord, coding_map_exact, cylinder_prob, random_periodic_word
from .system import (Atom, Edge, Interval, SpecError, SystemSpec, ValidatedSystem, fmt, to_rational,
                     validate)


@dataclass(frozen=True)
class Cut:
    atom: str
    at: Fraction
    side: str  # "left-closed": the cut point goes to the left piece; "right-closed": to the right one


@dataclass
class Refinement:
    system: ValidatedSystem
    base: ValidatedSystem
    r: dict[str, str]  # refined edge -> base edge
    pieces: dict[str, list[str]]  # base atom -> refined atoms

    def project(self, word: Sequence[str]) -> tuple[str, ...]:
        """Psi_r: symbol-wise projection to base edges."""
        return tuple(self.r[s] for s in word)

    def project_periodic(self, w: EventuallyPeriodicWord) -> EventuallyPeriodicWord:
        return EventuallyPeriodicWord(self.project(w.prefix), self.project(w.period))

    def lifts(self, base_word: Sequence[str], x: Fraction) -> list[tuple[str, ...]]:
        """All refined words from x that project onto base_word (at most one is a valid path from x)."""
        out = []
        for word in self._lift_from(base_word, Fraction(x)):
            out.append(word)
        return out

    def _lift_from(self, base_word, x):
        if not base_word:
            yield ()
            return
        src = self.system.atom_of(x)
        for e in self.system.edges_from(src):
            if self.r[e.id] == base_word[0]:
                for rest in self._lift_from(base_word[1:], e.map(x)):
                    yield (e.id,) + rest


def parse_cuts(text: str) -> list[Cut]:
    """``"2@1/2:left-closed,3@1/4"`` -> cuts (side defaults to left-closed)."""
    cuts = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            atom, rest = part.split("@", 1)
        except ValueError:
            raise SpecError(f"bad cut {part!r}; expected ATOM@POINT[:left-closed|right-closed]") from None
        side = "left-closed"
        if ":" in rest:
            rest, side = rest.split(":", 1)
        side = {"left": "left-closed", "right": "right-closed"}.get(side, side)
        if side not in ("left-closed", "right-closed"):
            raise SpecError(f"bad cut side {side!r}")
        cuts.append(Cut(atom.strip(), to_rational(rest, what="cut point"), side))
    return cuts


def _split(atom: Atom, points: list[Cut]) -> list[Atom]:
    iv = atom.interval
    pts = sorted(points, key=lambda c: c.at)
    for c in pts:
        if not (iv.lo < c.at < iv.hi):
            raise SpecError(f"cut {fmt(c.at)} is not interior to atom {atom.id} {iv}")
    if len({c.at for c in pts}) != len(pts):
        raise SpecError(f"repeated cut point in atom {atom.id}")
    out = []
    lo, lo_c = iv.lo, iv.lo_closed
    for k, c in enumerate(pts, start=1):
        left_gets = c.side == "left-closed"
        out.append(Atom(f"{atom.id}.{k}", Interval(lo, c.at, lo_c, left_gets)))
        lo, lo_c = c.at, not left_gets
    out.append(Atom(f"{atom.id}.{len(pts) + 1}", Interval(lo, iv.hi, lo_c, iv.hi_closed)))
    return out


def refine(system: ValidatedSystem, cuts: Iterable[Cut]) -> Refinement:
    """Cut atoms, restrict each edge to the pieces of its source atom, and re-validate."""
    if system.backend != "interval" or system.tail is not None:
        raise ValueError("refinement needs a finite interval system")
    by_atom: dict[str, list[Cut]] = {}
    for c in cuts:
        if c.atom not in system.atom_ids:
            raise SpecError(f"cut refers to unknown atom {c.atom!r}")
        by_atom.setdefault(c.atom, []).append(c)
    atoms: list[Atom] = []
    pieces: dict[str, list[str]] = {}
    for a in system.atoms:
        parts = _split(a, by_atom[a.id]) if a.id in by_atom else [a]
        atoms.extend(parts)
        pieces[a.id] = [p.id for p in parts]
    anchors = {}
    for a in system.atoms:
        x = system.anchors[a.id]
        for pid in pieces[a.id]:
            p = next(q for q in atoms if q.id == pid)
            anchors[pid] = x if p.contains(x) else (p.interval.lo if p.interval.is_point else p.interval.midpoint())
    edges, r = [], {}
    for e in system.edges:
        subs = pieces[e.source]
        for k, pid in enumerate(subs, start=1):
            eid = e.id if len(subs) == 1 else f"{e.id}_{k}"
            iv = next(q for q in atoms if q.id == pid).interval
            if iv.is_point:
                if e.prob(iv.lo) == 0:
                    continue
            elif e.prob.slope == 0 and e.prob.intercept == 0:
                continue
            edges.append(Edge(eid, pid, e.map, e.prob, None, e.group))
            r[eid] = e.id
    spec = SystemSpec("interval", system.space, atoms, anchors, edges, name=(system.name or "system") + "-refined")
    spec.raw = None
    # an edge that is zero on the whole piece is dropped above; one that vanishes at a
    # single endpoint of an interval piece stays and is checked by validate
    refined = validate(spec)
    return Refinement(refined, system, r, pieces)


# ---------------------------------------------------------------------------
# checks


def cylinder_pushforward_check(ref: Refinement, points: Iterable[Fraction], max_depth: int = 4) -> list[dict]:
    """P_x[base word] = sum of P_x over refined words projecting to it, for every base word up to max_depth."""
    from .coding import first_break

    rows = []
    base = ref.base
    ids = [e.id for e in base.edges]
    for x in points:
        x = Fraction(x)
        for depth in range(1, max_depth + 1):
            for word in _words(ids, depth):
                if first_break(word, base) is not None:
                    continue
                lhs = cylinder_prob(x, word, base)
                rhs = sum((cylinder_prob(x, w, ref.system) for w in ref.lifts(word, x)), Fraction(0))
                rows.append({"x": x, "word": word, "base": lhs, "refined": rhs, "ok": lhs == rhs})
    return rows


def _words(ids: Sequence[str], depth: int):
    if depth == 0:
        yield ()
        return
    for w in _words(ids, depth - 1):
        for e in ids:
            yield w + (e,)


def coding_commute_check(ref: Refinement, count: int, rng: random.Random) -> list[dict]:
    """F_base(Psi_r(w)) = F_refined(w) on random eventually periodic refined words."""
    rows = []
    for _ in range(count):
        w = random_periodic_word(ref.system, rng)
        fr = coding_map_exact(w, ref.system)
        fb = coding_map_exact(ref.project_periodic(w), ref.base)
        rows.append({"word": str(w), "refined": fr, "base": fb, "ok": fr == fb})
    return rows


def invariance_check(ref: Refinement, xs: np.ndarray, fns: Mapping[str, object] | None = None,
                     tol: float = 1e-12) -> dict[str, float]:
    """max |U_refined f - U_base f| over sample points, per test function."""
    from .simulation import CompiledSystem, apply_U

    cb, cr = CompiledSystem(ref.base), CompiledSystem(ref.system)
    if fns is None:
        fns = {"x": "x", "x^2": "x2", "sin": np.sin, "step": lambda y: (y > 0.3).astype(float)}
    out = {}
    for name, f in fns.items():
        out[name] = float(np.max(np.abs(apply_U(cr, f, xs) - apply_U(cb, f, xs))))
    return out
