"""Backward compositions of edge maps: the coding map, its truncation and cylinder masses.

Words are tuples of edge ids in chronological order, so ``word[-1]`` is the
most recent symbol (time 0) and ``word[0]`` the oldest.  The point coded by a
word is ``w_{word[-1]} o ... o w_{word[0]}`` applied to the anchor of the
source atom of ``word[0]``.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .system import IDENTITY, Affine, Endpoint, ValidatedSystem, fmt, prob_at


class WordError(ValueError):
    pass


def first_break(word: Sequence[str], system: ValidatedSystem) -> int | None:
    """Index k with t(word[k]) != i(word[k+1]), or None if the path is valid."""
    for k in range(len(word) - 1):
        if system.edge(word[k]).target != system.edge(word[k + 1]).source:
            return k
    return None


def check_word(word: Sequence[str], system: ValidatedSystem) -> None:
    ids = {e.id for e in system.edges}
    for s in word:
        if s not in ids:
            raise WordError(f"unknown edge {s!r}")
    k = first_break(word, system)
    if k is not None:
        raise WordError(f"invalid path: edge {word[k]} ends in atom {system.edge(word[k]).target} "
                        f"but edge {word[k + 1]} starts in atom {system.edge(word[k + 1]).source}")


@dataclass(frozen=True)
class EventuallyPeriodicWord:
    """Infinite past ``... period period prefix``, both parts chronological."""

    prefix: tuple[str, ...]
    period: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.period:
            raise WordError("period must be non-empty")

    def backward(self) -> Iterator[str]:
        """Symbols from time 0 into the past."""
        yield from reversed(self.prefix)
        while True:
            yield from reversed(self.period)

    def truncated(self, depth: int) -> tuple[str, ...]:
        """The most recent ``depth + 1`` symbols, chronological."""
        return tuple(reversed(list(itertools.islice(self.backward(), depth + 1))))

    def extend(self, e: str) -> "EventuallyPeriodicWord":
        return EventuallyPeriodicWord(self.prefix + (e,), self.period)

    def __str__(self) -> str:
        head = ",".join(self.prefix)
        return f"({','.join(self.period)})^inf" + (f",{head}" if head else "")


def check_periodic(word: EventuallyPeriodicWord, system: ValidatedSystem) -> None:
    check_word(word.period + word.period + word.prefix, system)


def composite(word: Sequence[str], system: ValidatedSystem) -> Affine:
    """w_{word[-1]} o ... o w_{word[0]}."""
    m = IDENTITY
    for s in word:
        m = system.edge(s).map.compose(m)
    return m


def eval_X(word: Sequence[str], system: ValidatedSystem) -> Fraction:
    """X_m for a finite chronological word, started at the anchor of its first atom."""
    if not word:
        raise WordError("empty word")
    check_word(word, system)
    x0 = system.anchors[system.edge(word[0]).source]
    return composite(word, system)(x0)


def coding_map_exact(word: EventuallyPeriodicWord, system: ValidatedSystem) -> Fraction:
    """F of an eventually periodic word: the period's fixed point pushed through the prefix."""
    check_periodic(word, system)
    per = composite(word.period, system)
    if abs(per.slope) >= 1:
        raise WordError(f"period composite has slope {fmt(per.slope)}; no contracting fixed point")
    return composite(word.prefix, system)(per.fixed_point())


def truncation_bound(system_a: Fraction, b: Fraction, depth: int) -> float:
    """2 C1 a^((depth+1)/2) / (1 - sqrt a) with C1 = 2b/(1-a)."""
    a = float(system_a)
    c1 = 2 * float(b) / (1 - a)
    return 2 * c1 * a ** ((depth + 1) / 2) / (1 - math.sqrt(a))


def coding_map_truncated(source: Iterable[str], depth: int, system: ValidatedSystem,
                         a: Fraction | None = None, b: Fraction | None = None) -> tuple[Fraction, float]:
    """X at the given depth from a backward symbol stream, with the a-priori error bound."""
    if depth < 0:
        raise ValueError("depth must be non-negative")
    syms = list(itertools.islice(iter(source), depth + 1))
    if len(syms) < depth + 1:
        raise WordError(f"symbol source ended after {len(syms)} symbols")
    if a is None or b is None:
        from .analysis import contraction_certificate, coupling_constant_b

        a, ok = contraction_certificate(system)
        if not ok:
            raise ValueError("system is not contractive on average; no truncation bound")
        b = coupling_constant_b(system)
    word = tuple(reversed(syms))
    return eval_X(word, system), truncation_bound(a, b, depth)


def cylinder_prob(x: Endpoint, word: Sequence[str], system: ValidatedSystem) -> Fraction:
    """P_x of the cylinder [word] (symbols in the order they are applied)."""
    if not isinstance(x, Fraction):
        x = Fraction(x)
    p = Fraction(1)
    for s in word:
        e = system.edge(s)
        q = prob_at(e, x, system)
        if q == 0:
            return Fraction(0)
        p *= q
        x = e.map(x)
    return p


def word_distance(u: EventuallyPeriodicWord, v: EventuallyPeriodicWord, cap: int = 64) -> tuple[Fraction, bool]:
    """d'(u, v) = 2^-k, k the number of agreeing symbols counted back from time 0.

    Futures are taken equal.  Returns (value, is_upper_bound); the flag is set when
    the words agree on all ``cap`` compared symbols.
    """
    k = 0
    for s, t in zip(itertools.islice(u.backward(), cap), itertools.islice(v.backward(), cap)):
        if s != t:
            return Fraction(1, 2 ** k), False
        k += 1
    return Fraction(1, 2 ** k), True


@dataclass
class HolderReport:
    constant: float
    exponent: float
    rows: list[dict]
    violations: int

    def to_dict(self) -> dict:
        return {"constant": self.constant, "exponent": self.exponent, "pairs": len(self.rows),
                "violations": self.violations}


def holder_constants(a: Fraction, b: Fraction) -> tuple[float, float]:
    ra = math.sqrt(float(a))
    return 8 * float(b) / ((1 - ra) * (1 - float(a))), math.log(ra) / math.log(0.5)


def holder_check(system: ValidatedSystem, pairs: Sequence[tuple[EventuallyPeriodicWord, EventuallyPeriodicWord]],
                 a: Fraction | None = None, b: Fraction | None = None) -> HolderReport:
    if a is None or b is None:
        from .analysis import contraction_certificate, coupling_constant_b

        a, _ = contraction_certificate(system)
        b = coupling_constant_b(system)
    const, expo = holder_constants(a, b)
    rows = []
    bad = 0
    for u, v in pairs:
        d = abs(coding_map_exact(u, system) - coding_map_exact(v, system))
        dp, _ = word_distance(u, v)
        bound = const * float(dp) ** expo
        ok = float(d) <= bound
        bad += not ok
        rows.append({"u": str(u), "v": str(v), "dF": d, "dprime": dp, "bound": bound, "ok": ok})
    return HolderReport(const, expo, rows, bad)


# ---------------------------------------------------------------------------
# random words


def _successors(system: ValidatedSystem) -> dict[str, list[str]]:
    return {e.id: [f.id for f in system.edges_from(e.target)] for e in system.edges}


def random_path(system: ValidatedSystem, length: int, rng: random.Random, start: str | None = None) -> tuple[str, ...]:
    succ = _successors(system)
    e = start if start is not None else rng.choice([x.id for x in system.edges])
    out = [e]
    while len(out) < length:
        e = rng.choice(succ[e])
        out.append(e)
    return tuple(out)


def random_cycle(system: ValidatedSystem, max_len: int, rng: random.Random, tries: int = 200) -> tuple[str, ...]:
    """A random closed path of length <= max_len (edges chronological)."""
    succ = _successors(system)
    ids = [e.id for e in system.edges]
    for _ in range(tries):
        start = rng.choice(ids)
        path = [start]
        for _ in range(max_len):
            nxt = succ[path[-1]]
            if start in nxt and rng.random() < 0.5:
                return tuple(path)
            path.append(rng.choice(nxt))
        for k in range(len(path)):
            if path[k] in succ[path[-1]]:
                return tuple(path[k:])
    raise WordError("could not find a cycle")


def random_periodic_word(system: ValidatedSystem, rng: random.Random, max_period: int = 4,
                         max_prefix: int = 6) -> EventuallyPeriodicWord:
    period = random_cycle(system, max_period, rng)
    prefix: list[str] = []
    e = period[-1]
    succ = _successors(system)
    for _ in range(rng.randint(0, max_prefix)):
        e = rng.choice(succ[e])
        prefix.append(e)
    return EventuallyPeriodicWord(tuple(prefix), period)


def related_pair(system: ValidatedSystem, rng: random.Random, max_shared: int = 12) -> tuple[
        EventuallyPeriodicWord, EventuallyPeriodicWord]:
    """Two eventually periodic words sharing a random number of recent symbols."""
    u = random_periodic_word(system, rng)
    v = random_periodic_word(system, rng)
    shared = rng.randint(0, max_shared)
    if shared == 0:
        return u, v
    succ = _successors(system)
    # continue both pasts with a common run; the run must fit behind each word
    run: list[str] = []
    e_u, e_v = u.truncated(0)[-1], v.truncated(0)[-1]
    first_choices = [f for f in succ[e_u] if f in succ[e_v]]
    if not first_choices:
        return u, v
    e = rng.choice(first_choices)
    run.append(e)
    for _ in range(shared - 1):
        e = rng.choice(succ[e])
        run.append(e)
    return (EventuallyPeriodicWord(u.prefix + tuple(run), u.period),
            EventuallyPeriodicWord(v.prefix + tuple(run), v.period))


def parse_word(text: str) -> tuple[str, ...]:
    """Comma separated symbols in composition order (time 0 first); returned chronological."""
    syms = tuple(s.strip() for s in text.split(",") if s.strip())
    return tuple(reversed(syms))
