"""Exact certificates, boundary operator and the existence/consistency verdicts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping

from .graph import forward_closure
from .system import Affine, Edge, Endpoint, ValidatedSystem, affine_sup, fmt

ONE = "ONE"  # stands for the constant function 1 as an argument of r_apply


# ---------------------------------------------------------------------------
# quantitative constants


def contraction_certificate(system: ValidatedSystem) -> tuple[Endpoint, bool]:
    """a = max over atoms of sup_x sum_e p_e(x) |slope_e|, with a < 1 flag."""
    if system.backend == "subshift":
        return Fraction(1, 2), True
    worst: Endpoint = Fraction(0)
    for atom in system.atoms:
        out = system.edges_from(atom.id)
        s = sum((e.prob.slope * abs(e.map.slope) for e in out), Fraction(0))
        c = sum((e.prob.intercept * abs(e.map.slope) for e in out), Fraction(0))
        val = affine_sup(Affine(s, c), atom.interval)
        if system.tail is not None and system.tail.source == atom.id:
            val = val + system.tail.slope_moment_upper() if system.tail.tail_term_finite() else math.inf
        worst = max(worst, val)
    return worst, worst < 1


def coupling_constant_b(system: ValidatedSystem) -> Endpoint:
    """b = sup_i sup_{x in K_i} sum_e p_e(x) d(w_e(x_i), x_{t(e)})."""
    if system.backend == "subshift":
        return Fraction(1)  # diameter of the subshift metric
    worst: Endpoint = Fraction(0)
    for atom in system.atoms:
        xi = system.anchors[atom.id]
        s = c = Fraction(0)
        for e in system.edges_from(atom.id):
            d = abs(e.map(xi) - system.anchors[e.target])
            s += e.prob.slope * d
            c += e.prob.intercept * d
        val = affine_sup(Affine(s, c), atom.interval)
        t = system.tail
        if t is not None and t.source == atom.id:
            val = val + t.coupling_upper(xi, system.anchors[t.target])
        worst = max(worst, val)
    return worst


@dataclass
class DominatingChain:
    xi: dict[str, Endpoint]
    q: dict[str, dict[str, Fraction]]
    c: Endpoint

    def to_dict(self) -> dict:
        return {"xi": {k: fmt(v) for k, v in self.xi.items()},
                "q": {i: {j: fmt(v) for j, v in row.items() if v} for i, row in self.q.items()},
                "c": fmt(self.c)}


def dominating_chain(system: ValidatedSystem) -> DominatingChain:
    """xi_i = sum of sup p_e over out-edges; q_ij its normalised split; c = sum_j sup_i xi_i q_ij."""
    if system.backend == "subshift":
        sh = system.subshift
        sup = {e: sh.sup_g(e) for e in sh.edge_ids}
        nodes = list(sh.vertices)
        src, tgt = sh.source, sh.target
        edges = [(e, src[e], tgt[e], sup[e]) for e in sh.edge_ids]
    else:
        nodes = system.atom_ids
        edges = [(e.id, e.source, e.target, affine_sup(e.prob, system.atom(e.source).interval))
                 for e in system.edges]
    mass: dict[str, dict[str, Endpoint]] = {i: {j: Fraction(0) for j in nodes} for i in nodes}
    for _, i, j, s in edges:
        mass[i][j] += s
    if system.backend == "interval" and system.tail is not None:
        t = system.tail
        mass[t.source][t.target] += t.sup_prob_sum()
    xi = {i: sum(mass[i].values(), Fraction(0)) for i in nodes}
    q = {i: {j: (mass[i][j] / xi[i] if xi[i] else Fraction(0)) for j in nodes} for i in nodes}
    c = sum((max(mass[i][j] for i in nodes) for j in nodes), Fraction(0))
    return DominatingChain(xi, q, c)


# ---------------------------------------------------------------------------
# boundary operator


@dataclass(frozen=True)
class BoundaryPoint:
    z: Fraction
    atoms: tuple[str, ...]  # atoms whose closure contains z but which do not contain it


def boundary_set(system: ValidatedSystem) -> list[BoundaryPoint]:
    if system.backend == "subshift":
        return []
    pts: dict[Fraction, list[str]] = {}
    for a in system.atoms:
        for z in a.interval.boundary():
            pts.setdefault(z, []).append(a.id)
    return [BoundaryPoint(z, tuple(ids)) for z, ids in sorted(pts.items())]


@dataclass(frozen=True)
class BoundaryFn:
    """Finitely supported nonnegative function; zero off its support."""

    values: tuple[tuple[Fraction, Fraction], ...]

    @classmethod
    def from_dict(cls, d: Mapping[Fraction, Fraction]) -> "BoundaryFn":
        return cls(tuple(sorted((z, v) for z, v in d.items() if v != 0)))

    def __call__(self, x: Endpoint) -> Fraction:
        for z, v in self.values:
            if z == x:
                return v
        return Fraction(0)

    def as_dict(self) -> dict[Fraction, Fraction]:
        return dict(self.values)

    @property
    def support(self) -> list[Fraction]:
        return [z for z, _ in self.values]

    def is_zero(self) -> bool:
        return not self.values

    def to_json(self) -> dict:
        return {fmt(z): fmt(v) for z, v in self.values}

    def __str__(self) -> str:
        if not self.values:
            return "0"
        return " + ".join(f"{fmt(v)}*1_{{{fmt(z)}}}" for z, v in self.values)


def dp_edges(system: ValidatedSystem, z: Fraction) -> list[tuple[Edge, Fraction, Fraction]]:
    """(edge, d-p_e(z), wbar_e(z)) for edges whose source atom has z as a boundary point."""
    out = []
    for a in system.atoms:
        if z in a.interval.boundary():
            for e in system.edges_from(a.id):
                out.append((e, e.prob(z), e.map(z)))
    return out


def r_kernel(system: ValidatedSystem, z: Fraction) -> dict[Fraction, Fraction]:
    k: dict[Fraction, Fraction] = {}
    for _, m, y in dp_edges(system, z):
        if m:
            k[y] = k.get(y, Fraction(0)) + m
    return k


def u_kernel(system: ValidatedSystem, z: Fraction) -> dict[Fraction, Fraction]:
    k: dict[Fraction, Fraction] = {}
    try:
        src = system.atom_of(z)
    except ValueError:  # z outside a restricted subsystem
        return k
    for e in system.edges_from(src):
        m = e.prob(z)
        if m:
            y = e.map(z)
            k[y] = k.get(y, Fraction(0)) + m
    return k


def r_apply(system: ValidatedSystem, f: Any) -> BoundaryFn:
    """(Rf)(z) = sum_e d-p_e(z) f(wbar_e(z)), for f = ONE or a BoundaryFn."""
    out = {}
    for bp in boundary_set(system):
        total = Fraction(0)
        for _, m, y in dp_edges(system, bp.z):
            if m:
                total += m * (Fraction(1) if f is ONE else f(y))
        out[bp.z] = total
    return BoundaryFn.from_dict(out)


def boundary_matrix(system: ValidatedSystem) -> dict[Fraction, dict[Fraction, Fraction]]:
    """A[z][y] = total d-p mass sent from z to boundary point y."""
    B = [bp.z for bp in boundary_set(system)]
    bset = set(B)
    A = {z: {y: Fraction(0) for y in B} for z in B}
    for z in B:
        for y, m in r_kernel(system, z).items():
            if y in bset:
                A[z][y] += m
    return A


@dataclass
class OmegaResult:
    omega: list[Fraction] | None  # None when undecided
    iterates: list[BoundaryFn]
    decided_at: int | None
    reason: str

    @property
    def decided(self) -> bool:
        return self.omega is not None


def omega_set(system: ValidatedSystem, n_max: int | None = None) -> OmegaResult:
    """Omega = intersection over n >= 1 of {R^n 1 >= 1}, by exact iteration with cycle detection."""
    B = [bp.z for bp in boundary_set(system)]
    if n_max is None:
        n_max = 2 * len(B) + 8
    f = r_apply(system, ONE)
    iterates = [f]
    if not B:
        return OmegaResult([], iterates, 1, "empty boundary set")
    A = boundary_matrix(system)
    candidate = {z for z in B if f(z) >= 1}
    seen = {f.values: 1}
    if not candidate:
        return OmegaResult([], iterates, 1, "R^1 1 < 1 everywhere")
    for k in range(2, n_max + 1):
        vals = {z: sum((A[z][y] * f(y) for y in B), Fraction(0)) for z in B}
        f = BoundaryFn.from_dict(vals)
        iterates.append(f)
        candidate = {z for z in candidate if f(z) >= 1}
        if not candidate:
            return OmegaResult([], iterates, k, f"R^{k} 1 < 1 everywhere")
        if f.values in seen:
            j = seen[f.values]
            return OmegaResult(sorted(candidate), iterates, k, f"iterates cycle (R^{k} 1 = R^{j} 1)")
        seen[f.values] = k
    return OmegaResult(None, iterates, None, f"undecided after {n_max} iterations")


# ---------------------------------------------------------------------------
# consistency


@dataclass
class CscResult:
    passed: bool
    witness: tuple[Fraction, Fraction, Fraction, Fraction] | None  # (z, y, R-mass, U-mass)
    kernels: dict[Fraction, tuple[dict, dict]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        w = None
        if self.witness:
            z, y, r, u = self.witness
            w = {"z": fmt(z), "y": fmt(y), "r_mass": fmt(r), "u_mass": fmt(u)}
        return {"passed": self.passed, "witness": w}


def csc_check(system: ValidatedSystem, omega: OmegaResult | Iterable[Fraction]) -> CscResult:
    """Kernel domination: at each z in Omega the R-kernel must not exceed the U-kernel."""
    if isinstance(omega, OmegaResult):
        if not omega.decided:
            raise ValueError("csc check needs a decided Omega")
        points = omega.omega
    else:
        points = list(omega)
    kernels = {}
    for z in points:
        rk, uk = r_kernel(system, z), u_kernel(system, z)
        kernels[z] = (rk, uk)
        for y in sorted(rk):
            if rk[y] > uk.get(y, Fraction(0)):
                return CscResult(False, (z, y, rk[y], uk.get(y, Fraction(0))), kernels)
    return CscResult(True, None, kernels)


def ucct_rule(system: ValidatedSystem) -> tuple[bool, str]:
    """All edges grouped; edges sharing a group carry identical affine formulas."""
    if system.backend == "subshift":
        return False, "not applicable to the subshift backend"
    groups: dict[str, Edge] = {}
    for e in system.edges:
        if e.group is None:
            return False, f"edge {e.id} has no group label"
        first = groups.setdefault(e.group, e)
        if first.map != e.map:
            return False, f"edges {first.id} and {e.id} share group {e.group} but their maps differ"
        if first.prob != e.prob:
            return False, (f"edges {first.id} and {e.id} share group {e.group} but probability formulas "
                           f"differ ({_affine_str(first.prob)} vs {_affine_str(e.prob)})")
    if system.tail is not None:
        return False, "tail families carry no group labels"
    return True, f"{len(groups)} groups with identical formulas"


def _num(x: Endpoint) -> str:
    """Exact value, with a decimal alongside when the denominator is unwieldy."""
    if isinstance(x, Fraction) and x.denominator > 10 ** 6:
        return f"{fmt(x)} (~{float(x):.6g})"
    return fmt(x)


def _affine_str(f) -> str:
    if f.slope == 0:
        return fmt(f.intercept)
    return f"{fmt(f.slope)}*x + {fmt(f.intercept)}"


def perp_cycle(system: ValidatedSystem, omega: Iterable[Fraction]) -> dict | None:
    """Periodic word whose orbit sits on boundary points carrying full d-p mass.

    Such a word codes a point outside the atom its next symbol needs, and the
    uniform measure on its orbit is a generalized invariant measure that gives
    no weight to the non-degenerate part, so the system is degenerate.
    """
    pts = set(omega)
    nodes = []
    succ: dict[tuple, list[tuple]] = {}
    for z in pts:
        for e, m, y in dp_edges(system, z):
            if m == 1 and y in pts:
                nodes.append((z, e.id))
    node_set = set(nodes)
    for z, eid in nodes:
        e = system.edge(eid)
        y = e.map(z)
        succ[(z, eid)] = [(y, f.id) for f in system.edges_from(e.target) if (y, f.id) in node_set]
    # depth-first search for a cycle
    color: dict[tuple, int] = {}
    stack_path: list[tuple] = []

    def dfs(u):
        color[u] = 1
        stack_path.append(u)
        for v in succ.get(u, []):
            if color.get(v, 0) == 1:
                return stack_path[stack_path.index(v):]
            if color.get(v, 0) == 0:
                r = dfs(v)
                if r:
                    return r
        stack_path.pop()
        color[u] = 2
        return None

    for u in sorted(nodes):
        if color.get(u, 0) == 0:
            cyc = dfs(u)
            if cyc:
                word = [eid for _, eid in cyc]
                comp = system.edge(word[0]).map
                for eid in word[1:]:
                    comp = system.edge(eid).map.compose(comp)
                if abs(comp.slope) >= 1:
                    continue
                z0 = cyc[0][0]
                return {"period": word, "point": z0, "atom": system.edge(word[0]).source}
    return None


# ---------------------------------------------------------------------------
# subsystems


@dataclass(frozen=True)
class Subsystem:
    atoms: tuple[str, ...]
    closed_in_K: bool
    minimal: bool

    def to_dict(self) -> dict:
        return {"atoms": list(self.atoms), "closed_in_K": self.closed_in_K, "minimal": self.minimal}


def _union_closed(system: ValidatedSystem, ids: Iterable[str]) -> bool:
    ivs = sorted((system.atom(i).interval for i in ids), key=lambda iv: (iv.lo, not iv.lo_closed))
    comps = []
    for iv in ivs:
        if comps:
            lo, lo_c, hi, hi_c = comps[-1]
            if iv.lo < hi or (iv.lo == hi and (iv.lo_closed or hi_c)):
                if iv.hi > hi or (iv.hi == hi and iv.hi_closed):
                    comps[-1] = (lo, lo_c, iv.hi, iv.hi_closed if iv.hi > hi else (hi_c or iv.hi_closed))
                continue
        comps.append((iv.lo, iv.lo_closed, iv.hi, iv.hi_closed))
    for lo, lo_c, hi, hi_c in comps:
        if not (lo_c or isinstance(lo, float)) or not (hi_c or isinstance(hi, float)):
            return False
    return True


def closed_subsystems(system: ValidatedSystem, max_enumerate: int = 14) -> list[Subsystem]:
    """Forward-closed atom sets: the closures of single atoms and their unions.

    Unions are enumerated only when there are at most ``max_enumerate`` distinct
    single-atom closures.
    """
    if system.backend == "subshift":
        return []
    succ: dict[str, set[str]] = {a: set() for a in system.atom_ids}
    for e in system.edges:
        succ[e.source].add(e.target)
    if system.tail is not None:
        succ[system.tail.source].add(system.tail.target)
    order = {a: k for k, a in enumerate(system.atom_ids)}
    base = []
    for a in system.atom_ids:
        cl = frozenset(forward_closure(succ, a))
        if cl not in base:
            base.append(cl)
    sets = set(base)
    if len(base) <= max_enumerate:
        frontier = set(base)
        while frontier:
            new = {s | t for s in frontier for t in base} - sets
            sets |= new
            frontier = new
    minimal = [s for s in base if not any(t < s for t in base)]
    out = []
    for s in sorted(sets, key=lambda s: (len(s), sorted(order[i] for i in s))):
        ids = tuple(sorted(s, key=order.get))
        out.append(Subsystem(ids, _union_closed(system, ids), s in minimal))
    return out


def restrict(system: ValidatedSystem, atoms: Iterable[str]) -> ValidatedSystem:
    keep = set(atoms)
    edges = tuple(e for e in system.edges if e.source in keep)
    for e in edges:
        if e.target not in keep:
            raise ValueError(f"atom set is not forward closed: edge {e.id} leaves it")
    tail = system.tail if system.tail is not None and system.tail.source in keep else None
    return ValidatedSystem(system.backend, tuple(a for a in system.atoms if a.id in keep), edges,
                           {k: v for k, v in system.anchors.items() if k in keep}, system.space, tail,
                           name=system.name, partial=True)


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class Verdict:
    status: str
    rule: str | None = None
    witness: Any = None
    note: str = ""

    def to_dict(self) -> dict:
        d = {"status": self.status}
        if self.rule:
            d["rule"] = self.rule
        if self.witness is not None:
            d["witness"] = _jsonable(self.witness)
        if self.note:
            d["note"] = self.note
        return d

    def __str__(self) -> str:
        s = self.status
        if self.rule:
            s += f" ({self.rule})"
        if self.note:
            s += f": {self.note}"
        return s


def _jsonable(x: Any) -> Any:
    if isinstance(x, (Fraction, float)) and not isinstance(x, bool):
        return fmt(x)
    if isinstance(x, Mapping):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class AnalysisReport:
    a: Endpoint
    contractive: bool
    b: Endpoint
    chain: DominatingChain
    boundary: list[BoundaryPoint]
    omega: OmegaResult
    csc: CscResult | None
    ucct: tuple[bool, str]
    subsystems: list[Subsystem]
    degeneracy: Verdict
    consistency: Verdict
    existence: Verdict
    hypotheses: dict[str, bool]
    eps_tail: float | None = None
    backend: str = "interval"
    name: str | None = None

    @property
    def verdict(self) -> str:
        return self.existence.status

    @property
    def C1(self) -> Endpoint:
        return 2 * self.b / (1 - self.a) if self.contractive else math.inf

    def to_dict(self) -> dict:
        d = {
            "backend": self.backend,
            "a": fmt(self.a), "contractive": self.contractive, "b": fmt(self.b),
            "C1": fmt(self.C1),
            "dominating_chain": self.chain.to_dict(),
            "boundary_set": [{"z": fmt(bp.z), "atoms": list(bp.atoms)} for bp in self.boundary],
            "R_iterates": [f.to_json() for f in self.omega.iterates],
            "omega": None if self.omega.omega is None else [fmt(z) for z in self.omega.omega],
            "omega_reason": self.omega.reason,
            "csc": None if self.csc is None else self.csc.to_dict(),
            "ucct": {"holds": self.ucct[0], "reason": self.ucct[1]},
            "subsystems": [s.to_dict() for s in self.subsystems],
            "degeneracy": self.degeneracy.to_dict(),
            "consistency": self.consistency.to_dict(),
            "existence": self.existence.to_dict(),
            "hypotheses": self.hypotheses,
        }
        if self.name:
            d["name"] = self.name
        if self.eps_tail is not None:
            d["eps_tail"] = self.eps_tail
        return d

    def to_text(self) -> str:
        lines = []
        if self.name:
            lines.append(f"system: {self.name}")
        tag = "" if self.eps_tail is None else f"  (truncated family, eps_tail = {self.eps_tail:.3g})"
        lines.append(f"a = {_num(self.a)}{tag}")
        lines.append(f"b = {_num(self.b)}")
        lines.append(f"C1 = {_num(self.C1)}")
        lines.append("xi = {" + ", ".join(f"{k}: {_num(v)}" for k, v in self.chain.xi.items()) + "}")
        lines.append(f"c = {_num(self.chain.c)}")
        lines.append("B = {" + ", ".join(fmt(bp.z) for bp in self.boundary) + "}")
        for k, f in enumerate(self.omega.iterates, start=1):
            lines.append(f"R^{k} 1 = {f}")
        if self.omega.omega is None:
            lines.append(f"Omega = undecided ({self.omega.reason})")
        else:
            lines.append("Omega = {" + ", ".join(fmt(z) for z in self.omega.omega) + "}")
        if self.csc is not None:
            lines.append("csc: " + ("passes" if self.csc.passed else "fails, witness " +
                                    str(self.csc.to_dict()["witness"])))
        lines.append(f"ucct: {'holds' if self.ucct[0] else 'fails'} ({self.ucct[1]})")
        for s in self.subsystems:
            flags = [t for t, on in (("closed-in-K", s.closed_in_K), ("minimal", s.minimal)) if on]
            lines.append("subsystem {" + ", ".join(s.atoms) + "}" + (f" [{', '.join(flags)}]" if flags else ""))
        lines.append(f"degeneracy: {self.degeneracy}")
        lines.append(f"consistency: {self.consistency}")
        status = self.existence.status
        if status == "existence guaranteed":
            lines.append(f"verdict: existence guaranteed ({self.existence.rule})")
        else:
            lines.append(f"verdict: {self.existence}")
        return "\n".join(lines)


def _hypotheses(system: ValidatedSystem, a, b, chain: DominatingChain) -> dict[str, bool]:
    finite_N = True  # partitions are finite here; tails add edges, not atoms
    return {
        "a<1": bool(a < 1),
        "b<inf": not (isinstance(b, float) and math.isinf(b)),
        "xi finite": all(not (isinstance(v, float) and math.isinf(v)) for v in chain.xi.values()),
        "c<inf or N finite": finite_N or not (isinstance(chain.c, float) and math.isinf(chain.c)),
    }


def _nondegenerate_or_consistent(system: ValidatedSystem, omega: OmegaResult) -> tuple[str | None, Any]:
    """Steps 1 and 2 of the decision procedure on a (sub)system; returns (rule, detail)."""
    if omega.decided and not omega.omega:
        return "eimc-i", None
    if omega.decided:
        csc = csc_check(system, omega)
        if csc.passed:
            return "usdmc", "csc-holds"
    u, _ = ucct_rule(system)
    if u:
        return "usdmc", "ucct-rule"
    return None, None


def classify(system: ValidatedSystem, n_max: int | None = None) -> AnalysisReport:
    a, contractive = contraction_certificate(system)
    b = coupling_constant_b(system)
    chain = dominating_chain(system)
    hyp = _hypotheses(system, a, b, chain)
    quantitative = all(hyp.values())
    eps = None if system.tail is None else system.tail.eps_tail

    if system.backend == "subshift":
        omega = OmegaResult([], [BoundaryFn(())], 1, "atoms are open: R1 = 0")
        deg = Verdict("non-degenerate", "open-partition", note="every atom is open, so R1 = 0")
        cons = Verdict("consistent", "omega-empty")
        ex = Verdict("existence guaranteed", "eimc-i")
        return AnalysisReport(a, contractive, b, chain, [], omega, None, (False, "not applicable"), [],
                              deg, cons, ex, hyp, eps, "subshift", system.name)

    B = boundary_set(system)
    omega = omega_set(system, n_max)
    csc = csc_check(system, omega) if omega.decided and omega.omega else None
    ucct = ucct_rule(system)
    subs = closed_subsystems(system)

    if omega.decided and not omega.omega:
        deg = Verdict("non-degenerate", "omega-empty", note=omega.reason)
    elif omega.decided:
        cyc = perp_cycle(system, omega.omega)
        if cyc:
            deg = Verdict("degenerate", "perp-cycle", witness=cyc,
                          note=f"periodic word ({','.join(cyc['period'])}) codes {fmt(cyc['point'])}, "
                               f"outside atom {cyc['atom']}")
        else:
            deg = Verdict("undecided", note="Omega is non-empty and no periodic witness was found")
    else:
        deg = Verdict("undecided", note=omega.reason)

    if omega.decided and not omega.omega:
        cons = Verdict("consistent", "omega-empty")
    elif csc is not None and csc.passed:
        cons = Verdict("consistent", "csc-holds")
    elif ucct[0]:
        cons = Verdict("consistent", "ucct-rule")
    elif csc is not None:
        cons = Verdict("inconsistent-candidate", "csc-fails", witness=csc.to_dict()["witness"])
    else:
        cons = Verdict("undecided", note=omega.reason)

    if not quantitative:
        failed = [k for k, v in hyp.items() if not v]
        ex = Verdict("not-established", note="quantitative hypotheses fail: " + ", ".join(failed))
    elif omega.decided and not omega.omega:
        ex = Verdict("existence guaranteed", "eimc-i")
    elif cons.status == "consistent":
        ex = Verdict("existence guaranteed", "usdmc", note=cons.rule)
    else:
        ex = None
        full = tuple(system.atom_ids)
        for s in subs:
            if not s.closed_in_K or s.atoms == full:
                continue
            sub = restrict(system, s.atoms)
            sa, sok = contraction_certificate(sub)
            if not sok:
                continue
            rule, detail = _nondegenerate_or_consistent(sub, omega_set(sub, n_max))
            if rule is not None:
                ex = Verdict("existence guaranteed", "sndct", witness=list(s.atoms),
                             note=f"closed subsystem {{{', '.join(s.atoms)}}} passes via {rule}"
                                  + (f" ({detail})" if detail else ""))
                break
        if ex is None:
            ex = Verdict("not-established", note="no rule applies" if omega.decided else omega.reason)
    return AnalysisReport(a, contractive, b, chain, B, omega, csc, ucct, subs, deg, cons, ex, hyp, eps,
                          "interval", system.name)
