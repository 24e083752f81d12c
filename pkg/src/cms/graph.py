"""Small directed-graph helpers (closures and strongly connected components)."""
from __future__ import annotations

from typing import Hashable, Iterable, Mapping


def forward_closure(succ: Mapping[Hashable, Iterable[Hashable]], start: Hashable) -> set:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in succ.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def strongly_connected(succ: Mapping[Hashable, Iterable[Hashable]]) -> list[list]:
    """Tarjan's algorithm, iterative."""
    index: dict = {}
    low: dict = {}
    on_stack: set = set()
    stack: list = []
    comps: list[list] = []
    counter = 0
    for root in succ:
        if root in index:
            continue
        work = [(root, iter(succ.get(root, ())))]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            u, it = work[-1]
            advanced = False
            for v in it:
                if v not in index:
                    index[v] = low[v] = counter
                    counter += 1
                    stack.append(v)
                    on_stack.add(v)
                    work.append((v, iter(succ.get(v, ()))))
                    advanced = True
                    break
                if v in on_stack:
                    low[u] = min(low[u], index[v])
            if advanced:
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[u])
            if low[u] == index[u]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == u:
                        break
                comps.append(comp)
    return comps


def closed_classes(succ: Mapping[Hashable, Iterable[Hashable]]) -> list[list]:
    """Strongly connected components with no edge leaving them."""
    out = []
    for comp in strongly_connected(succ):
        cs = set(comp)
        if all(v in cs for u in comp for v in succ.get(u, ())):
            out.append(comp)
    return out
