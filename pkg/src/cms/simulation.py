"""Monte Carlo for the Markov chain on states driven by the edge maps.

Dynamics run in double precision.  A state that lands within ``SNAP_TOL`` of an
atom endpoint is moved onto that endpoint, so the atom it belongs to is decided
by the exact open/closed flags rather than by rounding noise.
"""
from __future__ import annotations

import bisect
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Sequence

import numpy as np

from .system import Endpoint, ValidatedSystem, fmt

SNAP_TOL = 1e-14
MAX_SEED = 2 ** 63 - 1


class DivergenceError(RuntimeError):
    """The simulated state left every bounded region (became non-finite)."""

    def __init__(self, step: int):
        super().__init__(f"state became non-finite at step {step}")
        self.step = step


class RngStream:
    """Counter-based stream: (seed, stream id) determine every variate."""

    def __init__(self, seed: int, stream: int = 0):
        if not (0 <= seed <= MAX_SEED):
            raise ValueError(f"seed must be in [0, {MAX_SEED}]")
        self.seed, self.stream = int(seed), int(stream)
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def uniforms(self, n: int) -> np.ndarray:
        return self.gen.random(n)

    def child(self, stream: int) -> "RngStream":
        return RngStream(self.seed, stream)


def fresh_seed() -> int:
    return int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0] & np.uint64(MAX_SEED))


# ---------------------------------------------------------------------------
# float compilation


@dataclass
class _AtomCode:
    idx: int
    id: str
    lo: float
    hi: float
    lo_closed: bool
    hi_closed: bool
    anchor: float
    edges: list[int]  # indices into edge arrays
    slope: list[float]
    inter: list[float]
    pslope: list[float]
    pinter: list[float]
    tail: bool = False


class CompiledSystem:
    """Float view of a validated interval system, for fast stepping."""

    def __init__(self, system: ValidatedSystem):
        if system.backend != "interval":
            raise ValueError("compiled stepping needs an interval system")
        self.system = system
        self.edge_ids = [e.id for e in system.edges]
        eindex = {e: k for k, e in enumerate(self.edge_ids)}
        self.atoms: list[_AtomCode] = []
        for k, a in enumerate(system.atoms):
            out = system.edges_from(a.id)
            iv = a.interval
            self.atoms.append(_AtomCode(
                k, a.id, float(iv.lo), float(iv.hi), iv.lo_closed, iv.hi_closed, float(system.anchors[a.id]),
                [eindex[e.id] for e in out], [float(e.map.slope) for e in out],
                [float(e.map.intercept) for e in out], [float(e.prob.slope) for e in out],
                [float(e.prob.intercept) for e in out]))
        self.tail = system.tail
        if self.tail is not None:
            t = self.tail
            self.atoms[system.atom_ids.index(t.source)].tail = True
            self.tail_base = len(self.edge_ids)
            self.edge_ids = self.edge_ids + t.edge_ids
            cdf = np.cumsum(t.probs)
            self.tail_cdf = cdf / cdf[-1]
            self.tail_logp = np.log(t.probs / cdf[-1])
        self.order = sorted(range(len(self.atoms)),
                            key=lambda k: (self.atoms[k].lo, 0 if self.atoms[k].lo_closed else 1))
        self.los = [self.atoms[k].lo for k in self.order]
        ends = set()
        for a in self.atoms:
            for v in (a.lo, a.hi):
                if math.isfinite(v):
                    ends.add(v)
        self.ends = sorted(ends)
        self.edge_target = [self.atom_index(e.target) for e in system.edges]

    def atom_index(self, atom_id: str) -> int:
        return self.system.atom_ids.index(atom_id)

    def snap(self, x: float) -> float:
        j = bisect.bisect_left(self.ends, x)
        for i in (j - 1, j):
            if 0 <= i < len(self.ends) and abs(self.ends[i] - x) <= SNAP_TOL:
                return self.ends[i]
        return x

    @staticmethod
    def _inside(a: _AtomCode, x: float) -> bool:
        if x < a.lo or x > a.hi:
            return False
        if x == a.lo and not a.lo_closed:
            return False
        if x == a.hi and not a.hi_closed:
            return False
        return True

    def locate(self, x: float) -> int:
        k = bisect.bisect_right(self.los, x) - 1
        for j in (k, k - 1, k + 1, k - 2):
            if 0 <= j < len(self.order):
                a = self.atoms[self.order[j]]
                if self._inside(a, x):
                    return a.idx
        raise ValueError(f"state {x!r} is outside the state space")


# ---------------------------------------------------------------------------
# results


@dataclass
class Trajectory:
    states: np.ndarray  # post-burn-in states (before each recorded step)
    edges: np.ndarray  # edge index taken from each recorded state
    log_probs: np.ndarray
    edge_ids: list[str]
    atoms: np.ndarray  # atom index of each recorded state
    final: float

    def edge_names(self) -> list[str]:
        return [self.edge_ids[k] for k in self.edges]


@dataclass
class EmpiricalMeasure:
    atom_ids: list[str]
    counts: np.ndarray
    n: int
    sum_x: float
    sum_x2: float
    sum_L: float
    reservoir: np.ndarray
    batch_means: np.ndarray  # (batches, 3): x, x^2, L
    seeds: list[tuple[int, int]] = field(default_factory=list)

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / max(self.n, 1)

    @property
    def mean(self) -> float:
        return self.sum_x / self.n

    @property
    def second_moment(self) -> float:
        return self.sum_x2 / self.n

    @property
    def integral_L(self) -> float:
        return self.sum_L / self.n

    def standard_errors(self) -> np.ndarray:
        b = self.batch_means
        if len(b) < 2:
            return np.full(3, math.nan)
        return b.std(axis=0, ddof=1) / math.sqrt(len(b))

    def merge(self, other: "EmpiricalMeasure") -> "EmpiricalMeasure":
        if other.atom_ids != self.atom_ids:
            raise ValueError("cannot merge measures over different partitions")
        k = max(len(self.reservoir), len(other.reservoir))
        res = np.concatenate([self.reservoir, other.reservoir])
        if len(res) > k:
            res = res[:: max(1, len(res) // k)][:k]
        return EmpiricalMeasure(self.atom_ids, self.counts + other.counts, self.n + other.n,
                                self.sum_x + other.sum_x, self.sum_x2 + other.sum_x2, self.sum_L + other.sum_L,
                                res, np.vstack([self.batch_means, other.batch_means]), self.seeds + other.seeds)

    def histogram_rows(self) -> list[tuple[str, int, float]]:
        f = self.frequencies
        return [(a, int(c), float(p)) for a, c, p in zip(self.atom_ids, self.counts, f)]


# ---------------------------------------------------------------------------
# stepping


def _choose(a: _AtomCode, x: float, u: float, cs: CompiledSystem) -> tuple[int, float, float]:
    """Pick an edge at state x with uniform u; returns (edge index, new state, probability)."""
    if a.tail:
        n = int(np.searchsorted(cs.tail_cdf, u, side="right"))
        n = min(n, len(cs.tail_cdf) - 1)
        t = cs.tail
        return cs.tail_base + n, float(t.slopes[n]) * x + float(t.intercepts[n]), math.exp(cs.tail_logp[n])
    acc = 0.0
    last = -1
    for j in range(len(a.edges)):
        p = a.pslope[j] * x + a.pinter[j]
        if p <= 0.0:
            continue
        acc += p
        last = j
        if u < acc:
            return a.edges[j], a.slope[j] * x + a.inter[j], p
    if last < 0:
        raise RuntimeError(f"no edge with positive probability at {x!r}")
    # rounding left u above the float total; use the last live edge
    p = a.pslope[last] * x + a.pinter[last]
    return a.edges[last], a.slope[last] * x + a.inter[last], p


def step(x: float, system: ValidatedSystem | CompiledSystem, rng: RngStream) -> tuple[float, str, float]:
    cs = system if isinstance(system, CompiledSystem) else CompiledSystem(system)
    x = cs.snap(float(x))
    a = cs.atoms[cs.locate(x)]
    k, y, p = _choose(a, x, float(rng.uniforms(1)[0]), cs)
    return cs.snap(y), cs.edge_ids[k], p


def run(system: ValidatedSystem | CompiledSystem, x0: Endpoint, steps: int, burn_in: int, rng: RngStream,
        reservoir: int = 10_000, batches: int = 50, keep_trajectory: bool = True
        ) -> tuple[EmpiricalMeasure, Trajectory | None]:
    """Simulate ``steps`` transitions; the first ``burn_in`` are discarded."""
    if burn_in < 0 or steps <= burn_in:
        raise ValueError("need steps > burn_in >= 0 (no samples otherwise)")
    cs = system if isinstance(system, CompiledSystem) else CompiledSystem(system)
    x = cs.snap(float(x0))
    cs.locate(x)  # raises when x0 is outside the state space
    n = steps - burn_in
    us = rng.uniforms(steps)
    n_atoms = len(cs.atoms)
    counts = np.zeros(n_atoms, dtype=np.int64)
    if keep_trajectory:
        states = np.empty(n)
        edges = np.empty(n, dtype=np.int64)
        logp = np.empty(n)
        atom_seq = np.empty(n, dtype=np.int32)
    stride = max(1, n // reservoir) if reservoir else 0
    res: list[float] = []
    nb = max(1, min(batches, n))
    bsize = n // nb
    bsums = np.zeros((nb, 3))
    sx = sx2 = sL = 0.0
    atoms = cs.atoms
    snap, locate, choose = cs.snap, cs.locate, _choose
    log = math.log
    isfinite = math.isfinite
    with np.errstate(over="ignore", invalid="ignore"):  # divergence is raised below
        for t in range(steps):
            k = locate(x)
            a = atoms[k]
            if t >= burn_in:
                i = t - burn_in
                counts[k] += 1
                L = abs(x - a.anchor)
                sx += x
                sx2 += x * x
                sL += L
                bi = min(i // bsize, nb - 1) if bsize else 0
                row = bsums[bi]
                row[0] += x
                row[1] += x * x
                row[2] += L
                if stride and i % stride == 0 and len(res) < reservoir:
                    res.append(x)
            e, y, p = choose(a, x, us[t], cs)
            if t >= burn_in and keep_trajectory:
                states[i] = x
                edges[i] = e
                logp[i] = log(p)
                atom_seq[i] = k
            if not isfinite(y):
                raise DivergenceError(t + 1)
            x = snap(y)
    sizes = np.full(nb, bsize, dtype=float)
    sizes[-1] = n - bsize * (nb - 1)
    measure = EmpiricalMeasure([a.id for a in atoms], counts, n, sx, sx2, sL, np.array(res),
                               bsums / sizes[:, None], [(rng.seed, rng.stream)])
    traj = None
    if keep_trajectory:
        traj = Trajectory(states, edges, logp, cs.edge_ids, atom_seq, x)
    return measure, traj


def _replica(args) -> EmpiricalMeasure:
    spec_json, x0, steps, burn, seed, stream, reservoir = args
    from .system import parse_spec, validate

    system = validate(parse_spec(spec_json))
    m, _ = run(system, x0, steps, burn, RngStream(seed, stream), reservoir=reservoir, keep_trajectory=False)
    return m


def run_replicas(system: ValidatedSystem, x0: Endpoint, steps: int, burn_in: int, seed: int, replicas: int = 1,
                 threads: int = 1, reservoir: int = 10_000) -> EmpiricalMeasure:
    """Independent replicas on streams 0..R-1, merged in stream order (thread count does not matter)."""
    if replicas < 1:
        raise ValueError("replicas must be positive")
    if replicas == 1 or threads <= 1:
        out = [run(system, x0, steps, burn_in, RngStream(seed, r), reservoir=reservoir, keep_trajectory=False)[0]
               for r in range(replicas)]
    else:
        spec = system.to_json()
        jobs = [(spec, float(x0), steps, burn_in, seed, r, reservoir) for r in range(replicas)]
        with ProcessPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(_replica, jobs))
    m = out[0]
    for o in out[1:]:
        m = m.merge(o)
    return m


# ---------------------------------------------------------------------------
# operator U on float samples


def _poly_moments(cs: CompiledSystem):
    t = cs.tail
    p = t.probs / t.probs.sum()
    s, c = t.slopes, t.intercepts
    return float(p @ s), float(p @ c), float(p @ (s * s)), float(p @ (s * c)), float(p @ (c * c))


def apply_U(system: ValidatedSystem | CompiledSystem, f: Callable[[np.ndarray], np.ndarray] | str,
            xs: np.ndarray) -> np.ndarray:
    """(Uf)(x) = sum_e p_e(x) f(w_e(x)) for each sample.

    ``f`` is a vectorised callable, or one of ``"x"``, ``"x2"``, ``"atom:<id>"``.
    On a tail-family atom only the named polynomial and indicator functions are
    supported (they reduce to moments of the family).
    """
    cs = system if isinstance(system, CompiledSystem) else CompiledSystem(system)
    xs = np.asarray(xs, dtype=float)
    idx = np.array([cs.locate(cs.snap(x)) for x in xs], dtype=np.int64)
    out = np.zeros_like(xs)
    named = f if isinstance(f, str) else None
    for a in cs.atoms:
        mask = idx == a.idx
        if not mask.any():
            continue
        x = xs[mask]
        if a.tail:
            ms, mc, mss, msc, mcc = _poly_moments(cs)
            if named == "x":
                out[mask] = ms * x + mc
            elif named == "x2":
                out[mask] = mss * x * x + 2 * msc * x + mcc
            elif named and named.startswith("atom:"):
                out[mask] = 1.0 if cs.system.tail.target == named[5:] else 0.0
            else:
                raise ValueError("only named test functions are supported on a tail-family atom")
            continue
        acc = np.zeros_like(x)
        for j, e in enumerate(a.edges):
            p = a.pslope[j] * x + a.pinter[j]
            y = a.slope[j] * x + a.inter[j]
            if named == "x":
                v = y
            elif named == "x2":
                v = y * y
            elif named and named.startswith("atom:"):
                v = np.full_like(y, 1.0 if cs.system.edges[e].target == named[5:] else 0.0)
            else:
                v = np.asarray(f(y), dtype=float)
            acc += p * v
        out[mask] = acc
    return out


def _eval_f(cs: CompiledSystem, f, xs: np.ndarray) -> np.ndarray:
    if f == "x":
        return xs
    if f == "x2":
        return xs * xs
    if isinstance(f, str) and f.startswith("atom:"):
        k = cs.atom_index(f[5:])
        return np.array([1.0 if cs.locate(cs.snap(x)) == k else 0.0 for x in xs])
    return np.asarray(f(xs), dtype=float)


def invariance_residual(system: ValidatedSystem | CompiledSystem, measure: EmpiricalMeasure,
                        fns: Mapping[str, Callable | str] | None = None) -> dict[str, float]:
    """|mean(Uf) - mean(f)| over the reservoir, per test function."""
    cs = system if isinstance(system, CompiledSystem) else CompiledSystem(system)
    if fns is None:
        fns = {"x": "x", "x^2": "x2", **{f"1[atom {a.id}]": f"atom:{a.id}" for a in cs.atoms}}
    xs = measure.reservoir
    if len(xs) == 0:
        raise ValueError("empty reservoir")
    out = {}
    for name, f in fns.items():
        out[name] = float(abs(apply_U(cs, f, xs).mean() - _eval_f(cs, f, xs).mean()))
    return out


# ---------------------------------------------------------------------------
# occupation measures


def occupation(system: ValidatedSystem, x0: Endpoint, n: int, rng: RngStream) -> dict[str, float]:
    """Fraction of the first n steps spent in each atom."""
    m, _ = run(system, x0, n, 0, rng, reservoir=0, keep_trajectory=False)
    return dict(zip(m.atom_ids, m.frequencies.tolist()))


def cesaro_gap(system: ValidatedSystem, x0: Endpoint, n: int, rng: RngStream) -> float:
    """max_j |alpha_n(K_j) - alpha_2n(K_j)| along one trajectory of length 2n."""
    _, tr = run(system, x0, 2 * n, 0, rng, reservoir=0)
    k = len(system.atoms)
    first = np.bincount(tr.atoms[:n], minlength=k) / n
    both = np.bincount(tr.atoms, minlength=k) / (2 * n)
    return float(np.max(np.abs(first - both)))


@dataclass
class TightnessReport:
    windows: list[float]
    tail_mass: list[float]
    kind: str  # "atom-index" or "state"
    verdict: str
    note: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "windows": self.windows, "tail_mass": self.tail_mass,
                "verdict": self.verdict, "note": self.note}


def occupation_tightness(system: ValidatedSystem, x0: Endpoint, n: int, rng: RngStream,
                         windows: Sequence[float] | None = None, tol: float = 1e-3) -> TightnessReport:
    """Tail mass of the occupation measure outside growing windows.

    With several atoms the windows are atom ordinals (mass beyond ordinal J);
    with a single atom they are state windows [-W, W].
    """
    kind = "atom-index" if len(system.atoms) > 1 else "state"
    if windows is None:
        windows = list(range(1, len(system.atoms))) if kind == "atom-index" else [2.0 ** k for k in range(0, 41, 4)]
    try:
        _, tr = run(system, x0, n, 0, rng, reservoir=0)
    except DivergenceError as exc:
        return TightnessReport(list(windows), [1.0] * len(windows), kind, "diverged",
                               f"state escaped to infinity at step {exc.step} of {n}")
    if kind == "atom-index":
        tails = [float(np.mean(tr.atoms > w)) for w in windows]
    else:
        tails = [float(np.mean(np.abs(tr.states) > w)) for w in windows]
    monotone = all(b <= a for a, b in zip(tails, tails[1:]))
    ok = monotone and tails[-1] < tol
    return TightnessReport(list(windows), tails, kind, "empirically tight" if ok else "not tight",
                           "" if ok else f"tail mass {tails[-1]:.3g} beyond the largest window")


def phi_cylinder_estimate(system: ValidatedSystem, x: Endpoint, word: Sequence[str], samples: int,
                          rng: RngStream) -> tuple[float, float]:
    """Monte Carlo estimate of P_x[word] with its standard error."""
    cs = CompiledSystem(system)
    want = [cs.edge_ids.index(s) for s in word]
    hits = 0
    us = rng.uniforms(samples * len(word)).reshape(samples, len(word))
    x0 = cs.snap(float(x))
    for r in range(samples):
        y = x0
        for j, target in enumerate(want):
            a = cs.atoms[cs.locate(y)]
            e, y, _ = _choose(a, y, us[r, j], cs)
            if e != target:
                break
            y = cs.snap(y)
        else:
            hits += 1
    p = hits / samples
    return p, math.sqrt(max(p * (1 - p), 0.0) / samples)


# ---------------------------------------------------------------------------
# U^n L


def _L_exact(system: ValidatedSystem, x: Fraction) -> Fraction:
    return abs(x - system.anchors[system.atom_of(x)])


def un_L(system: ValidatedSystem, x0: Endpoint, n: int, rng: RngStream | None = None,
         max_support: int = 1 << 14, samples: int = 20_000) -> tuple[float, float]:
    """(U^n L)(x0) and a standard error (zero when computed exactly)."""
    x0 = Fraction(x0) if not isinstance(x0, Fraction) else x0
    dist: dict[Fraction, Fraction] = {x0: Fraction(1)}
    for _ in range(n):
        nxt: dict[Fraction, Fraction] = {}
        for x, m in dist.items():
            for e in system.edges_from(system.atom_of(x)):
                p = e.prob(x)
                if p:
                    y = e.map(x)
                    nxt[y] = nxt.get(y, Fraction(0)) + m * p
        dist = nxt
        if len(dist) > max_support:
            break
    else:
        return float(sum(m * _L_exact(system, x) for x, m in dist.items())), 0.0
    if rng is None:
        raise ValueError("support too large for exact evaluation; pass an rng")
    cs = CompiledSystem(system)
    vals = np.empty(samples)
    us = rng.uniforms(samples * n).reshape(samples, n)
    for r in range(samples):
        y = cs.snap(float(x0))
        for j in range(n):
            a = cs.atoms[cs.locate(y)]
            _, y, _ = _choose(a, y, us[r, j], cs)
            y = cs.snap(y)
        vals[r] = abs(y - cs.atoms[cs.locate(y)].anchor)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


def moments_rows(m: EmpiricalMeasure, residuals: Mapping[str, float]) -> list[tuple[str, float]]:
    se = m.standard_errors()
    rows = [("n", float(m.n)), ("mean", m.mean), ("mean_se", float(se[0])), ("second_moment", m.second_moment),
            ("second_moment_se", float(se[1])), ("integral_L", m.integral_L), ("integral_L_se", float(se[2]))]
    rows += [(f"residual[{k}]", v) for k, v in residuals.items()]
    return rows


__all__ = ["RngStream", "CompiledSystem", "EmpiricalMeasure", "Trajectory", "DivergenceError", "run", "step",
           "run_replicas", "apply_U", "invariance_residual", "occupation", "cesaro_gap", "occupation_tightness",
           "phi_cylinder_estimate", "un_L", "fresh_seed", "fmt"]
