"""One-sided subshifts of finite type driven by a finite-memory g-function.

A memory-``l`` table assigns a probability to every admissible word of length
``l``: the last symbol is the next edge, the preceding ``l - 1`` symbols are the
context it is conditioned on.  For ``l = 1`` the context is just the current
vertex, which gives an ordinary Markov chain on edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .system import SpecError, to_rational


@dataclass
class ShiftSpec:
    vertices: list[str]
    edges: list[tuple[str, str, str]]  # (id, from, to)
    memory: int
    table: dict[tuple[str, ...], Fraction]


@dataclass
class SubshiftSystem:
    vertices: tuple[str, ...]
    edge_ids: tuple[str, ...]
    source: dict[str, str]
    target: dict[str, str]
    memory: int
    table: dict[tuple[str, ...], Fraction]
    contexts: tuple[tuple[str, ...], ...] = field(default=())

    def out_edges(self, vertex: str) -> list[str]:
        return [e for e in self.edge_ids if self.source[e] == vertex]

    def context_vertex(self, ctx: tuple[str, ...], start: str | None = None) -> str:
        return self.target[ctx[-1]] if ctx else start

    def g(self, ctx: tuple[str, ...], e: str) -> Fraction:
        """g(context . e); zero for undefined (forbidden) words."""
        key = tuple(ctx[-(self.memory - 1):]) + (e,) if self.memory > 1 else (e,)
        return self.table.get(key, Fraction(0))

    def admissible(self, word: Sequence[str]) -> bool:
        return all(self.target[a] == self.source[b] for a, b in zip(word, word[1:]))

    def sup_g(self, e: str) -> Fraction:
        """Supremum of g(. e) over all pasts ending at the source of e."""
        vals = [v for k, v in self.table.items() if k[-1] == e]
        return max(vals, default=Fraction(0))

    def transition_matrix(self) -> dict[str, dict[str, Fraction]]:
        """Vertex chain for memory 1."""
        if self.memory != 1:
            raise ValueError("vertex transition matrix is only defined for memory 1")
        P = {v: {w: Fraction(0) for w in self.vertices} for v in self.vertices}
        for e in self.edge_ids:
            P[self.source[e]][self.target[e]] += self.g((), e)
        return P


@dataclass
class ShiftState:
    context: tuple[str, ...]  # last edges, most recent last
    vertex: str


def parse_shift(data: Mapping) -> ShiftSpec:
    graph = data.get("graph") or {}
    vertices = [str(v) for v in graph.get("vertices", [])]
    if len(set(vertices)) != len(vertices):
        raise SpecError("duplicate vertex id")
    edges = []
    seen: set[str] = set()
    for e in graph.get("edges", []):
        eid = str(e.get("id"))
        if eid in seen:
            raise SpecError(f"duplicate edge id {eid!r}")
        seen.add(eid)
        if "," in eid:
            raise SpecError(f"edge id {eid!r} may not contain a comma")
        edges.append((eid, str(e.get("from")), str(e.get("to"))))
    if not edges:
        raise SpecError("system has no edges")
    g = data.get("g") or {}
    memory = int(g.get("memory", 1))
    if memory < 1:
        raise SpecError("g.memory must be at least 1")
    table = {}
    for k, v in (g.get("table") or {}).items():
        word = tuple(s.strip() for s in str(k).split(","))
        table[word] = to_rational(v, what=f"g[{k}]")
    return ShiftSpec(vertices, edges, memory, table)


def _paths(edges: Sequence[str], src: Mapping[str, str], tgt: Mapping[str, str], length: int):
    words: list[tuple[str, ...]] = [(e,) for e in edges]
    for _ in range(length - 1):
        words = [w + (e,) for w in words for e in edges if tgt[w[-1]] == src[e]]
    return words


def validate_shift(spec: ShiftSpec) -> SubshiftSystem:
    vs = set(spec.vertices)
    src, tgt = {}, {}
    for eid, a, b in spec.edges:
        if a not in vs or b not in vs:
            raise SpecError(f"edge {eid}: unknown vertex")
        src[eid], tgt[eid] = a, b
    eids = tuple(e for e, _, _ in spec.edges)
    for v in spec.vertices:
        if not any(src[e] == v for e in eids):
            raise SpecError(f"vertex {v} has no outgoing edge")
        if not any(tgt[e] == v for e in eids):
            raise SpecError(f"vertex {v} has no incoming edge")
    ell = spec.memory
    for word, val in spec.table.items():
        if len(word) != ell:
            raise SpecError(f"g-table word {','.join(word)} has length {len(word)}, expected {ell}")
        if any(s not in src for s in word):
            raise SpecError(f"g-table word {','.join(word)} uses an unknown edge")
        if any(tgt[a] != src[b] for a, b in zip(word, word[1:])):
            raise SpecError(f"g-table word {','.join(word)} is not admissible")
        if not (0 <= val <= 1):
            raise SpecError(f"g-table value for {','.join(word)} is outside [0, 1]")
    system = SubshiftSystem(tuple(spec.vertices), eids, src, tgt, ell, dict(spec.table))
    if ell == 1:
        ctxs: list[tuple[str, ...]] = []
        for v in spec.vertices:
            total = sum((system.g((), e) for e in eids if src[e] == v), Fraction(0))
            if total != 1:
                raise SpecError(f"g-values out of vertex {v} sum to {total}, not 1")
    else:
        ctxs = _paths(eids, src, tgt, ell - 1)
        for ctx in ctxs:
            v = tgt[ctx[-1]]
            total = sum((system.g(ctx, e) for e in eids if src[e] == v), Fraction(0))
            if total != 1:
                raise SpecError(f"g-values after context {','.join(ctx)} sum to {total}, not 1")
    system.contexts = tuple(ctxs)
    return system


def shift_to_json(s: ShiftSpec | SubshiftSystem) -> dict:
    if isinstance(s, SubshiftSystem):
        edges = [{"id": e, "from": s.source[e], "to": s.target[e]} for e in s.edge_ids]
        vertices = list(s.vertices)
    else:
        edges = [{"id": e, "from": a, "to": b} for e, a, b in s.edges]
        vertices = list(s.vertices)
    return {"backend": "subshift", "graph": {"vertices": vertices, "edges": edges},
            "g": {"memory": s.memory, "table": {",".join(k): str(v) for k, v in s.table.items()}}}


def subshift_step(state: ShiftState, system: SubshiftSystem, u: float) -> tuple[ShiftState, str, float]:
    """Advance one symbol using a uniform variate ``u``; returns (state, edge, p)."""
    acc = 0.0
    chosen = None
    p_chosen = 0.0
    for e in system.out_edges(state.vertex):
        p = float(system.g(state.context, e))
        if p <= 0:
            continue
        acc += p
        chosen, p_chosen = e, p
        if u < acc:
            break
    if chosen is None:
        raise RuntimeError(f"no admissible extension at vertex {state.vertex}")
    keep = max(system.memory, 1)
    ctx = (state.context + (chosen,))[-keep:]
    return ShiftState(ctx, system.target[chosen]), chosen, p_chosen


def metric(a: Sequence[str], b: Sequence[str]) -> tuple[Fraction, bool]:
    """d(a, b) = 2^k, k the least integer with a_i = b_i for all k < i <= 0.

    Words are finite pasts, most recent symbol last.  Returns (value, is_upper_bound);
    the flag is set when the words agree on their whole common length.
    """
    n = min(len(a), len(b))
    agree = 0
    while agree < n and a[-1 - agree] == b[-1 - agree]:
        agree += 1
    if agree == n:
        return Fraction(1, 2 ** n), True
    return Fraction(1, 2 ** agree), False


def compiled_table(system: SubshiftSystem):
    """Lookup structures for fast sampling: per-context cumulative arrays."""
    index = {e: i for i, e in enumerate(system.edge_ids)}
    table: dict[tuple[str, ...], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
    keys = system.contexts if system.memory > 1 else [()]
    for ctx in keys:
        for v in system.vertices:
            if ctx and system.target[ctx[-1]] != v:
                continue
            outs = [e for e in system.out_edges(v) if system.g(ctx, e) > 0]
            p = np.array([float(system.g(ctx, e)) for e in outs])
            table[(ctx, v)] = (np.array([index[e] for e in outs]), np.cumsum(p), np.log(p))
    return index, table


def words_of_length(system: SubshiftSystem, length: int) -> list[tuple[str, ...]]:
    return _paths(system.edge_ids, system.source, system.target, length)


def entropy_rate_exact(system: SubshiftSystem, pi: Mapping[str, Fraction]) -> float:
    """- sum_v pi_v sum_e g(e) log g(e) for a memory-1 table."""
    h = 0.0
    for v in system.vertices:
        for e in system.out_edges(v):
            p = float(system.g((), e))
            if p > 0:
                h -= float(pi[v]) * p * math.log(p)
    return h


__all__ = ["ShiftSpec", "SubshiftSystem", "ShiftState", "parse_shift", "validate_shift", "subshift_step",
           "metric", "words_of_length"]
