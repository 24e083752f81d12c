"""Command line front end: ``cms <subcommand> SPEC [options]``.

Exit status: 0 on success, 1 for invalid input, 2 when ``--strict`` is given and
the analysis verdict is undecided or not established.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import random
import sys
import time
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .system import SpecError, fmt, load_spec, to_rational, validate


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 1 rather than argparse's 2, which is reserved
        self.print_usage(sys.stderr)
        raise UsageError(message)


# ---------------------------------------------------------------------------
# helpers


def _spec_hash(path: str) -> str:
    if path.startswith("@"):
        from .catalog import builtin

        data = json.dumps(builtin(path[1:]), sort_keys=True).encode()
    else:
        data = Path(path).read_bytes()
    return hashlib.sha256(data).hexdigest()


def _emit(args, payload: dict, text: str) -> None:
    if args.format == "json":
        print(json.dumps(payload, indent=2, default=_default))
    else:
        print(text)


def _default(o: Any):
    if isinstance(o, Fraction):
        return fmt(o)
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(type(o).__name__)


def _seed(args) -> int:
    from .simulation import fresh_seed

    if args.seed is None:
        args.seed = fresh_seed()
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _manifest(args, argv: Sequence[str], started: float, outputs: list[str]) -> dict:
    flags = {k: v for k, v in vars(args).items() if k not in ("func", "spec", "command")}
    return {
        "tool": "cms", "version": __version__, "command": args.command, "spec": args.spec,
        "spec_sha256": _spec_hash(args.spec), "flags": flags, "seed": getattr(args, "seed", None),
        "argv": list(argv), "outputs": outputs,
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_seconds": round(time.time() - started, 3),
    }


def _write_manifest(args, argv, started, outputs: list[str]) -> str | None:
    target = getattr(args, "manifest", None)
    if target is None and outputs:
        target = outputs[0] + ".manifest.json"
    if target is None:
        return None
    with open(target, "w", encoding="utf-8") as fh:
        json.dump(_manifest(args, argv, started, outputs), fh, indent=2, default=_default)
    return target


def _x0(text: str):
    try:
        return to_rational(text, what="--x0")
    except SpecError as exc:
        raise UsageError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args, argv, started) -> int:
    system = validate(load_spec(args.spec))
    if system.backend == "subshift":
        sh = system.subshift
        info = {"valid": True, "backend": "subshift", "vertices": list(sh.vertices), "edges": list(sh.edge_ids),
                "memory": sh.memory}
        text = f"valid subshift: {len(sh.vertices)} vertices, {len(sh.edge_ids)} edges, memory {sh.memory}"
    else:
        info = {"valid": True, "backend": "interval",
                "atoms": [{**a.to_json(), "anchor": fmt(system.anchors[a.id])} for a in system.atoms],
                "edges": [{"id": e.id, "from": e.source, "to": e.target} for e in system.edges]}
        lines = [f"valid interval system: {len(system.atoms)} atoms, {len(system.edges)} edges"]
        for a in system.atoms:
            lines.append(f"  atom {a.id}: {a.interval}  anchor {fmt(system.anchors[a.id])}")
        for e in system.edges:
            lines.append(f"  edge {e.id}: {e.source} -> {e.target}")
        if system.tail is not None:
            from .tails import describe

            info["tail_family"] = {"eps_tail": system.tail.eps_tail, "Z": system.tail.Z}
            lines.append("  " + describe(system.tail))
        text = "\n".join(lines)
    _emit(args, info, text)
    return 0


def cmd_analyze(args, argv, started) -> int:
    from .analysis import classify

    report = classify(validate(load_spec(args.spec)), n_max=args.n_max)
    _emit(args, report.to_dict(), report.to_text())
    _write_manifest(args, argv, started, [])
    if args.strict and report.existence.status != "existence guaranteed":
        return 2
    return 0


def cmd_subsystems(args, argv, started) -> int:
    from .analysis import closed_subsystems

    subs = closed_subsystems(validate(load_spec(args.spec)))
    lines = []
    for s in subs:
        flags = [t for t, on in (("closed-in-K", s.closed_in_K), ("minimal", s.minimal)) if on]
        lines.append("{" + ", ".join(s.atoms) + "}" + (f"  [{', '.join(flags)}]" if flags else ""))
    _emit(args, {"subsystems": [s.to_dict() for s in subs]}, "\n".join(lines) or "(none)")
    return 0


def cmd_simulate(args, argv, started) -> int:
    from .simulation import (CompiledSystem, DivergenceError, invariance_residual, moments_rows, run_replicas)

    system = validate(load_spec(args.spec))
    if system.backend != "interval":
        raise UsageError("simulate works on interval systems; use 'thermo' for subshifts")
    seed = _seed(args)
    x0 = _x0(args.x0)
    try:
        m = run_replicas(system, x0, args.steps, args.burn, seed, args.replicas, args.threads, args.reservoir)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    res = invariance_residual(CompiledSystem(system), m)
    rows = moments_rows(m, res)
    outputs = []
    if args.out:
        out = Path(args.out)
        with open(out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["atom_id", "count", "frequency"])
            for aid, c, f in m.histogram_rows():
                w.writerow([aid, c, repr(f)])
        mom = out.with_name(out.stem + "_moments.csv")
        with open(mom, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["quantity", "value"])
            for k, v in rows:
                w.writerow([k, repr(v)])
        outputs = [str(out), str(mom)]
    payload = {"seed": seed, "replicas": args.replicas, "samples": m.n,
               "histogram": [{"atom_id": a, "count": c, "frequency": f} for a, c, f in m.histogram_rows()],
               "moments": dict(rows), "outputs": outputs}
    lines = [f"seed {seed}, {m.n} samples over {args.replicas} replica(s)"]
    lines += [f"  atom {a}: {c} ({f:.6f})" for a, c, f in m.histogram_rows()]
    lines += [f"  {k} = {v:.6g}" for k, v in rows]
    _emit(args, payload, "\n".join(lines))
    _write_manifest(args, argv, started, outputs)
    return 0


def cmd_code(args, argv, started) -> int:
    from .coding import (EventuallyPeriodicWord, WordError, check_word, coding_map_exact, coding_map_truncated,
                         eval_X, parse_word)

    system = validate(load_spec(args.spec))
    if system.backend != "interval":
        raise UsageError("code works on interval systems")
    prefix = parse_word(args.word or "")
    try:
        if args.period:
            w = EventuallyPeriodicWord(prefix, parse_word(args.period))
            if args.depth is None:
                val, bound, how = coding_map_exact(w, system), 0.0, "exact"
            else:
                val, bound = coding_map_truncated(w.backward(), args.depth, system)
                how = f"depth {args.depth}"
        else:
            if not prefix:
                raise UsageError("give --word and/or --period")
            check_word(prefix, system)
            if args.depth is not None:
                val, bound = coding_map_truncated(reversed(prefix), args.depth, system)
                how = f"depth {args.depth}"
            else:
                val, bound, how = eval_X(prefix, system), math.nan, f"finite word (depth {len(prefix) - 1})"
    except WordError as exc:
        raise UsageError(str(exc)) from None
    try:
        atom = system.atom_of(val)
    except ValueError:
        atom = None
    payload = {"value": fmt(val), "float": float(val), "atom": atom, "bound": bound, "mode": how}
    text = f"F = {fmt(val)} (~{float(val):.12g}) in atom {atom}; {how}"
    if bound and not math.isnan(bound):
        text += f"; |error| <= {bound:.6g}"
    _emit(args, payload, text)
    return 0


def cmd_thermo(args, argv, started) -> int:
    from .simulation import RngStream, run
    from .thermo import free_energy_residual, run_subshift

    system = validate(load_spec(args.spec))
    seed = _seed(args)
    if args.steps <= args.burn:
        raise UsageError("need --steps > --burn")
    if system.backend == "subshift":
        traj = run_subshift(system.subshift, args.steps, RngStream(seed), burn_in=args.burn)
    else:
        _, traj = run(system, _x0(args.x0), args.steps, args.burn, RngStream(seed), reservoir=0)
    rep = free_energy_residual(traj, args.memory)
    payload = {k: v for k, v in rep.to_dict().items() if k in ("H_m", "u_avg", "residual", "se", "verdict")}
    payload.update(memory=args.memory, seed=seed, entropy_possibly_infinite=rep.entropy_possibly_infinite)
    text = (f"H_{args.memory} = {rep.H_m:.6f}\nu_avg = {rep.u_avg:.6f}\nresidual = {rep.residual:.6g} "
            f"(SE {rep.se:.3g})\nverdict: {rep.verdict}")
    _emit(args, payload, text)
    _write_manifest(args, argv, started, [])
    return 0


def cmd_refine(args, argv, started) -> int:
    from .refine import coding_commute_check, cylinder_pushforward_check, parse_cuts, refine

    system = validate(load_spec(args.spec))
    ref = refine(system, parse_cuts(args.cuts))
    doc = ref.system.to_json()
    outputs = []
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2), encoding="utf-8")
        outputs.append(args.out)
    payload: dict[str, Any] = {"atoms": len(ref.system.atoms), "edges": len(ref.system.edges), "r": ref.r,
                               "system": doc}
    lines = [f"refined system: {len(ref.system.atoms)} atoms, {len(ref.system.edges)} edges"]
    lines += [f"  {k} -> {v}" for k, v in ref.r.items()]
    if args.check:
        cyl = cylinder_pushforward_check(ref, [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)], 3)
        com = coding_commute_check(ref, 50, random.Random(args.check_seed))
        payload["checks"] = {"cylinder_rows": len(cyl), "cylinder_failures": sum(not r["ok"] for r in cyl),
                             "commute_rows": len(com), "commute_failures": sum(not r["ok"] for r in com)}
        lines.append(f"checks: {payload['checks']}")
    _emit(args, payload, "\n".join(lines))
    _write_manifest(args, argv, started, outputs)
    return 0


def cmd_replay(args, argv, started) -> int:
    man = json.loads(Path(args.manifest_file).read_text(encoding="utf-8"))
    if _spec_hash(man["spec"]) != man["spec_sha256"]:
        print("error: system file changed since the manifest was written", file=sys.stderr)
        return 1
    return main(man["argv"])


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cms", description="Contractive Markov systems on interval partitions and subshifts.")
    p.add_argument("--version", action="version", version=f"cms {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, manifest=True):
        sp.add_argument("spec", help="system JSON file, or @name for a built-in system")
        sp.add_argument("--format", choices=("json", "text"), default="text")
        if manifest:
            sp.add_argument("--manifest", help="where to write the run manifest")

    sp = sub.add_parser("validate", help="check a system description")
    common(sp, manifest=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("analyze", help="exact certificates and existence verdict")
    common(sp)
    sp.add_argument("--n-max", type=int, default=None, help="iteration cap for Omega")
    sp.add_argument("--strict", action="store_true", help="exit 2 unless existence is established")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("subsystems", help="forward-closed atom sets")
    common(sp, manifest=False)
    sp.set_defaults(func=cmd_subsystems)

    sp = sub.add_parser("simulate", help="Monte Carlo occupation, moments and invariance residuals")
    common(sp)
    sp.add_argument("--x0", required=True)
    sp.add_argument("--steps", type=int, required=True)
    sp.add_argument("--burn", type=int, default=0)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--replicas", type=int, default=1)
    sp.add_argument("--threads", type=int, default=1)
    sp.add_argument("--reservoir", type=int, default=10_000)
    sp.add_argument("--out", help="histogram CSV; moments go to <stem>_moments.csv")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("code", help="evaluate the coding map")
    common(sp, manifest=False)
    sp.add_argument("--word", help="symbols, most recent first, comma separated")
    sp.add_argument("--period", help="repeating block, most recent first")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--exact", action="store_true", help="exact value (default with --period)")
    g.add_argument("--depth", type=int, help="truncate after depth+1 symbols and report the error bound")
    sp.set_defaults(func=cmd_code)

    sp = sub.add_parser("thermo", help="energy average, block entropy and free-energy residual")
    common(sp)
    sp.add_argument("--memory", type=int, default=1)
    sp.add_argument("--steps", type=int, default=100_000)
    sp.add_argument("--burn", type=int, default=1000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--x0", default="1/2", help="start state (interval systems)")
    sp.set_defaults(func=cmd_thermo)

    sp = sub.add_parser("refine", help="cut atoms and derive the refined system")
    common(sp)
    sp.add_argument("--cuts", required=True, help='e.g. "2@1/2:left-closed"')
    sp.add_argument("--out", help="write the refined system JSON here")
    sp.add_argument("--check", action="store_true", help="run cylinder and coding checks")
    sp.add_argument("--check-seed", type=int, default=0)
    sp.set_defaults(func=cmd_refine)

    sp = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    sp.add_argument("manifest_file")
    sp.set_defaults(func=cmd_replay, format="text")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.time()
    try:
        args = build_parser().parse_args(argv)
        return args.func(args, argv, started)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SpecError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
