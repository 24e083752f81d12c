"""Countable edge families attached to one atom, truncated at a finite index.

Weights, slopes and intercepts are given as small arithmetic expressions in
``n`` (and ``Z``, the normalising constant).  They are evaluated with numpy in
double precision; every quantity that feeds a certificate is rounded outward
to a dyadic rational before it leaves this module.
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping

import numpy as np

from .system import Atom, Interval, SpecError, TailSpec, fmt

_FUNCS = {"log": np.log, "sqrt": np.sqrt, "exp": np.exp, "abs": np.abs, "log2": np.log2}
_CONSTS = {"pi": math.pi, "e": math.e}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)

# relative slack applied when turning a float sum into a certified bound
_SLACK = 1e-9


def compile_expr(text: str, names: tuple[str, ...]):
    """Compile a whitelisted arithmetic expression; returns a callable of **names."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise SpecError(f"bad expression {text!r}: {exc.msg}") from None
    allowed = set(names) | set(_FUNCS) | set(_CONSTS)
    for node in ast.walk(tree):
        if not isinstance(node, _NODES):
            raise SpecError(f"expression {text!r}: construct {type(node).__name__} not allowed")
        if isinstance(node, ast.Name) and node.id not in allowed:
            raise SpecError(f"expression {text!r}: unknown name {node.id!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise SpecError(f"expression {text!r}: only {sorted(_FUNCS)} may be called")
        if isinstance(node, ast.Constant) and not isinstance(node.value, (int, float)):
            raise SpecError(f"expression {text!r}: only numeric constants allowed")
    code = compile(tree, "<tail>", "eval")

    def fn(**env: Any):
        scope = {"__builtins__": {}, **_FUNCS, **_CONSTS, **env}
        with np.errstate(all="ignore"):
            return eval(code, scope)  # noqa: S307 - whitelisted AST above

    return fn


def upper(x: float) -> Fraction:
    """Dyadic rational >= x, with a relative safety margin."""
    if not math.isfinite(x):
        raise ValueError("cannot certify a non-finite bound")
    return Fraction(x + abs(x) * _SLACK + 1e-300)


@dataclass
class TruncatedTail:
    spec: TailSpec
    source: str
    target: str
    ns: np.ndarray
    probs: np.ndarray  # p_n for n0..n_max (sums to 1 - eps)
    slopes: np.ndarray
    intercepts: np.ndarray
    Z: float
    eps_tail: float  # upper bound on the neglected mass
    tail_slope_mass: float  # upper bound on sum_{n > n_max} p_n |slope_n|, inf if unknown

    @property
    def edge_ids(self) -> list[str]:
        return [f"{self.spec.prefix}{n}" for n in self.ns]

    def to_json(self) -> dict:
        return self.spec.to_json()

    # certified sums -----------------------------------------------------

    def mass_upper(self) -> Fraction:
        return upper(float(np.sum(self.probs)))

    def slope_moment_upper(self) -> Fraction:
        """Upper bound on sum_n p_n |slope_n| including the neglected tail."""
        head = float(np.sum(self.probs * np.abs(self.slopes)))
        return upper(head) + (upper(self.tail_slope_mass) if math.isfinite(self.tail_slope_mass) else 0)

    def tail_term_finite(self) -> bool:
        return math.isfinite(self.tail_slope_mass)

    def eps_upper(self) -> Fraction:
        return upper(self.eps_tail)

    def coupling_upper(self, x_src: Fraction, x_tgt: Fraction) -> Fraction | float:
        """Upper bound on sum_n p_n |w_n(x_src) - x_tgt|."""
        xs = float(x_src)
        head = float(np.sum(self.probs * np.abs(self.slopes * xs + self.intercepts - float(x_tgt))))
        if not math.isfinite(self.tail_slope_mass):
            return math.inf
        c = self.intercepts
        if not np.all(c == c[0]):
            return math.inf
        tail = self.tail_slope_mass * abs(xs) + self.eps_tail * abs(float(c[0]) - float(x_tgt))
        return upper(head) + upper(tail)

    def sup_prob_sum(self) -> Fraction:
        return self.mass_upper()


def build_tail(t: TailSpec, index: Mapping[str, Atom], atoms) -> TruncatedTail:
    if t.source not in index:
        raise SpecError(f"tail_family: unknown source atom {t.source!r}")
    if t.n_max < t.n0:
        raise SpecError("tail_family: n_max must be at least n0")
    src = index[t.source].interval
    if src.boundary():
        raise SpecError("tail families are supported only on atoms without boundary points")
    ns = np.arange(t.n0, t.n_max + 1, dtype=np.float64)
    weight = np.asarray(compile_expr(t.weight, ("n",))(n=ns), dtype=float) * np.ones_like(ns)
    if not np.all(np.isfinite(weight)) or np.any(weight <= 0):
        raise SpecError("tail_family: weights must be finite and positive")
    tail_w = compile_expr(t.tail_weight, ("M",))
    tw = float(tail_w(M=float(t.n_max)))
    if not (math.isfinite(tw) and tw >= 0):
        raise SpecError("tail_family: tail_weight must be finite and non-negative")
    # the tail bound must dominate the actual partial sums it claims to cover
    csum = np.cumsum(weight[::-1])[::-1]  # csum[k] = sum_{j >= k} weight[j]
    for k in np.unique(np.geomspace(1, len(ns) - 1, num=24).astype(int)) if len(ns) > 1 else []:
        m = float(ns[k - 1])
        claimed = float(tail_w(M=m))
        if claimed + 1e-12 * csum[k] < csum[k] + tw:
            raise SpecError(f"tail_family: tail_weight({m:g}) = {claimed:.6g} is below the summed "
                            f"weights beyond it ({csum[k] + tw:.6g})")
    Z = float(np.sum(weight)) + tw
    probs = weight / Z
    slopes = np.asarray(compile_expr(t.slope, ("n", "Z"))(n=ns, Z=Z), dtype=float) * np.ones_like(ns)
    inter = np.asarray(compile_expr(t.intercept, ("n", "Z"))(n=ns, Z=Z), dtype=float) * np.ones_like(ns)
    if not (np.all(np.isfinite(slopes)) and np.all(np.isfinite(inter))):
        raise SpecError("tail_family: maps must be finite")
    tsm = math.inf
    if t.tail_slope_weight is not None:
        tsm = float(compile_expr(t.tail_slope_weight, ("M", "Z"))(M=float(t.n_max), Z=Z)) / Z
    target = t.target
    if target is None:
        if len(index) != 1:
            raise SpecError("tail_family: 'to' is required when there is more than one atom")
        target = t.source
    if target not in index:
        raise SpecError(f"tail_family: unknown target atom {target!r}")
    tiv = index[target].interval
    # spot-check images on a grid of indices (images are affine in the atom)
    for k in np.unique(np.geomspace(1, len(ns), num=32).astype(int) - 1):
        s, c = float(slopes[k]), float(inter[k])
        for x in (src.lo, src.hi):
            y = s * float(x) + c if not (isinstance(x, float) and math.isinf(x)) else math.copysign(math.inf, s * x)
            if not (float(tiv.lo) <= y <= float(tiv.hi)):
                raise SpecError(f"tail_family: image of atom {t.source} under n={int(ns[k])} "
                                f"leaves atom {target} {tiv}")
    return TruncatedTail(t, t.source, target, ns.astype(np.int64), probs, slopes, inter, Z,
                         tw / Z, tsm)


def describe(tail: TruncatedTail) -> str:
    return (f"tail family on atom {tail.source}: n = {tail.spec.n0}..{tail.spec.n_max}, "
            f"Z = {tail.Z:.6g}, eps_tail = {tail.eps_tail:.3g}")


__all__ = ["TruncatedTail", "build_tail", "compile_expr", "upper", "describe", "Interval", "fmt"]
