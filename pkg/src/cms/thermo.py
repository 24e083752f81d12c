"""Energy averages, block entropies and the free-energy residual along a trajectory."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .graph import closed_classes, strongly_connected
from .subshift import ShiftState, SubshiftSystem, compiled_table
from .simulation import RngStream, Trajectory


class ReducibleChainError(ValueError):
    def __init__(self, classes: list[list[str]]):
        super().__init__("chain is reducible; closed classes: " + "; ".join("{" + ", ".join(c) + "}" for c in classes))
        self.classes = classes


def energy_average(trajectory: Trajectory) -> float:
    """Mean of log p along the trajectory."""
    if len(trajectory.log_probs) == 0:
        raise ValueError("empty trajectory")
    return float(np.mean(trajectory.log_probs))


def _codes(edges: np.ndarray, m: int, base: int) -> np.ndarray:
    """Integer code of each length-(m+1) window ending at position t >= m."""
    n = len(edges)
    code = np.zeros(n - m, dtype=np.int64)
    for j in range(m + 1):
        code = code * base + edges[j:n - m + j]
    return code


def _plugin_entropy(codes: np.ndarray) -> float:
    _, counts = np.unique(codes, return_counts=True)
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum())


def block_entropy(edges: Sequence[int] | np.ndarray, m: int) -> float:
    """Plug-in conditional entropy of the next edge given the previous m edges."""
    e = np.asarray(edges, dtype=np.int64)
    if m < 0:
        raise ValueError("memory must be non-negative")
    if len(e) <= m + 1:
        raise ValueError("trajectory too short for this memory")
    base = int(e.max()) + 1
    if base ** (m + 1) >= 2 ** 62:
        # remap to dense codes to keep products in range
        _, e = np.unique(e, return_inverse=True)
        base = int(e.max()) + 1
        if base ** (m + 1) >= 2 ** 62:
            raise ValueError("alphabet too large for this memory")
    joint = _plugin_entropy(_codes(e, m, base))
    if m == 0:
        return joint
    ctx = _plugin_entropy(_codes(e[:-1], m - 1, base))
    return joint - ctx


@dataclass
class ResidualReport:
    memory: int
    H_m: float
    u_avg: float
    residual: float
    se: float
    verdict: str
    entropy_possibly_infinite: bool = False

    def to_dict(self) -> dict:
        return {"memory": self.memory, "H_m": self.H_m, "u_avg": self.u_avg, "residual": self.residual,
                "se": self.se, "verdict": self.verdict, "entropy_possibly_infinite": self.entropy_possibly_infinite}


def entropy_possibly_infinite(edges: np.ndarray, log_probs: np.ndarray | None = None) -> bool:
    """Heuristic: the edge alphabet keeps growing and the marginal entropy keeps climbing."""
    n = len(edges)
    if n < 1000:
        return False
    half = edges[: n // 2]
    distinct_full = len(np.unique(edges))
    distinct_half = len(np.unique(half))
    growing = distinct_full > 1.3 * distinct_half and distinct_full > 1000
    if not growing:
        return False
    return _plugin_entropy(edges) - _plugin_entropy(half) > 0.05


def free_energy_residual(trajectory: Trajectory, m: int, batches: int = 20) -> ResidualReport:
    """rho_m = H_m + mean(log p), with a batch-means standard error."""
    e = np.asarray(trajectory.edges)
    inf_flag = entropy_possibly_infinite(e)
    H = block_entropy(e, m)
    u = energy_average(trajectory)
    rho = H + u
    n = len(e)
    size = n // batches
    vals = []
    if size > 10 * (m + 2):
        for b in range(batches):
            sl = slice(b * size, (b + 1) * size)
            vals.append(block_entropy(e[sl], m) + float(np.mean(trajectory.log_probs[sl])))
    # batch estimates carry extra plug-in bias, so only their spread is used
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else math.nan
    if inf_flag:
        verdict = "entropy possibly infinite; residual test inapplicable"
    elif abs(rho) <= max(3 * se, 1e-12):
        verdict = "equality within 3 SE"
    elif rho < 0:
        verdict = "strict inequality (not an equilibrium sample)"
    else:
        verdict = "positive residual (estimator bias or too little data)"
    return ResidualReport(m, H, u, rho, se, verdict, inf_flag)


def residual_profile(trajectory: Trajectory, memories: Sequence[int]) -> list[ResidualReport]:
    return [free_energy_residual(trajectory, m) for m in memories]


# ---------------------------------------------------------------------------
# exact stationary law


def _solve(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(A)
    M = [row[:] + [b[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ValueError("singular system")
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        M[col] = [v / pv for v in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[i][n] for i in range(n)]


def markov_stationary_oracle(P: Mapping[str, Mapping[str, Fraction]]) -> dict[str, Fraction]:
    """Exact pi with pi P = pi, sum pi = 1, for an irreducible rational chain."""
    states = list(P)
    for s in states:
        total = sum((Fraction(v) for v in P[s].values()), Fraction(0))
        if total != 1:
            raise ValueError(f"row {s} sums to {total}, not 1")
    succ = {s: [t for t, v in P[s].items() if v] for s in states}
    if len(strongly_connected(succ)) != 1:
        raise ReducibleChainError(closed_classes(succ))
    n = len(states)
    # (P^T - I) pi = 0 with the last equation replaced by normalisation
    A = [[Fraction(P[states[j]].get(states[i], 0)) - (1 if i == j else 0) for j in range(n)] for i in range(n)]
    A[-1] = [Fraction(1)] * n
    b = [Fraction(0)] * (n - 1) + [Fraction(1)]
    return dict(zip(states, _solve(A, b)))


# ---------------------------------------------------------------------------
# subshift trajectories


def run_subshift(system: SubshiftSystem, steps: int, rng: RngStream, start: ShiftState | None = None,
                 burn_in: int = 0) -> Trajectory:
    """Sample the edge process; ``states`` holds the vertex index before each step."""
    if steps <= burn_in:
        raise ValueError("need steps > burn_in")
    index, table = compiled_table(system)
    vidx = {v: k for k, v in enumerate(system.vertices)}
    if start is None:
        start = ShiftState((), system.vertices[0])
        if system.memory > 1:
            start = ShiftState(system.contexts[0], system.target[system.contexts[0][-1]])
    ctx, v = tuple(start.context), start.vertex
    keep = max(system.memory - 1, 0)
    ids = list(system.edge_ids)
    us = rng.uniforms(steps)
    n = steps - burn_in
    edges = np.empty(n, dtype=np.int64)
    logp = np.empty(n)
    verts = np.empty(n, dtype=np.int32)
    tgt = [vidx[system.target[e]] for e in ids]
    vnames = list(system.vertices)
    ctx_key = ctx[-keep:] if keep else ()
    for t in range(steps):
        eidx, cdf, lp = table[(ctx_key, v)]
        j = int(np.searchsorted(cdf, us[t] * cdf[-1], side="right"))
        j = min(j, len(cdf) - 1)
        k = int(eidx[j])
        if t >= burn_in:
            i = t - burn_in
            edges[i] = k
            logp[i] = lp[j]
            verts[i] = vidx[v]
        v = vnames[tgt[k]]
        if keep:
            ctx_key = (ctx_key + (ids[k],))[-keep:]
    return Trajectory(verts.astype(float), edges, logp, ids, verts, float(vidx[v]))


def vertex_occupation(traj: Trajectory, system: SubshiftSystem) -> dict[str, float]:
    counts = np.bincount(traj.atoms, minlength=len(system.vertices)) / len(traj.atoms)
    return dict(zip(system.vertices, counts.tolist()))


def mismatched(traj: Trajectory, other: SubshiftSystem) -> Trajectory:
    """Same edge path, log-probabilities re-scored under another memory-1 table."""
    lp = np.array([math.log(float(other.g((), traj.edge_ids[k]))) for k in traj.edges])
    return Trajectory(traj.states, traj.edges, lp, traj.edge_ids, traj.atoms, traj.final)
