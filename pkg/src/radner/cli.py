"""Command-line entry point.

Exit codes::

    0   success (verified equilibrium, no block found, theorem confirmed)
    1   certificate found / counterexample candidate / nothing to resize
    2   quasi-equilibrium only
    3   no certificate or indeterminate solver outcome
    64  usage or parse error
    65  audit or hypothesis failure
    66  infeasible or inadmissible input allocation
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .blocking import (AubinSearchPolicy, aubin_block, certificate_problems, ex_post_block,
                       fine_dominate, private_core_membership)
from .continuum import ContinuumError, continuum_residuals, lemma_shrink, resize_to_measure
from .economy import EconomyError, as_allocation, audit_assumptions, is_feasible
from .equilibrium import (EquilibriumRejected, NoCertificate, SolverConfig,
                          quasi_to_full_upgrade_check, solve_equilibrium, verify_equilibrium)
from .io import (FormatError, allocation_from_blocks, allocation_to_blocks, canonical_json,
                 certificate_to_dict, digest, dump_economy, generate, load_economy, PROFILES)
from .lattice import (LatticeError, SPACE_FAMILIES, SpaceDescriptor, classify_space,
                      format_classification)
from .parallel import default_threads
from .programs import SolverIndeterminate
from .verifier import (COUNTEREXAMPLE, CONFIRMED, INDETERMINATE, RGrid, THEOREMS, UNMET,
                       check_corollary5, check_proposition2, check_theorem5, check_theorem6,
                       check_theorem7, check_theorem8)

EXIT_OK, EXIT_FOUND, EXIT_QUASI, EXIT_NOCERT = 0, 1, 2, 3
EXIT_USAGE, EXIT_AUDIT, EXIT_INFEASIBLE = 64, 65, 66

MODES = ("private", "aubin", "expost", "fine", "weakfine")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol", type=float, default=1e-6, help="blocking / verification tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $RADNER_THREADS or 1)")
    p.add_argument("--strict", action="store_true", help="reject unknown fields in input files")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.add_argument("--timing", action="store_true",
                   help="include wall time (makes reports non-reproducible)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="radner", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"radner {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("solve", help="compute and verify an equilibrium")
    p.add_argument("file")
    _common(p)

    p = sub.add_parser("core", help="run a blocking oracle on an allocation")
    p.add_argument("file")
    p.add_argument("--allocation", help="embedded allocation name or JSON file")
    p.add_argument("--mode", choices=MODES, default="private")
    p.add_argument("--policy", default="", help="Aubin policy, e.g. depth=4,near=0.0625:0.25,refine=6,minweight=0.001")
    _common(p)

    p = sub.add_parser("vind", help="resize a blocking coalition to given measures")
    p.add_argument("file")
    p.add_argument("--allocation")
    p.add_argument("--epsilon", default="0.1,0.25,0.5,0.75,0.9",
                   help="comma-separated target measures in (0, 1)")
    _common(p)

    p = sub.add_parser("verify", help="run a theorem check")
    p.add_argument("file")
    p.add_argument("--theorem", choices=THEOREMS, required=True)
    p.add_argument("--allocation", help="defaults to the solved equilibrium allocation")
    p.add_argument("--policy", default="")
    p.add_argument("--r-grid", default="default", help="K:M lattice steps and random points")
    _common(p)

    p = sub.add_parser("generate", help="emit a seeded random economy file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--states", type=int, default=2)
    p.add_argument("--profile", choices=PROFILES, default="strict")
    p.add_argument("--out")

    p = sub.add_parser("chart", help="Banach-lattice chart row for a space family")
    p.add_argument("space", choices=SPACE_FAMILIES + ("all",))
    p.add_argument("--p", type=float, default=None)
    return parser


def parse_policy(text: str) -> AubinSearchPolicy:
    if not text:
        return AubinSearchPolicy()
    kw = {}
    for item in text.split(","):
        key, _, val = item.partition("=")
        try:
            if key == "depth":
                kw["depth"] = int(val)
            elif key == "near":
                kw["near_complete"] = tuple(float(v) for v in val.split(":") if v)
            elif key == "refine":
                steps = int(val)
                kw["refine"] = steps > 0
                kw["refine_steps"] = max(steps, 0)
            elif key == "minweight":
                kw["min_weight"] = float(val)
                if not 0 < kw["min_weight"] <= 1:
                    raise ValueError
            elif key == "coalitions" and val in ("all", "grand"):
                kw["coalitions"] = val
            else:
                raise ValueError
        except ValueError:
            raise UsageError(f"bad policy item {item!r}") from None
    return AubinSearchPolicy(**kw)


_NOT_ECHOED = ("--threads", "--out")


def _echo(argv: Sequence[str]) -> list[str]:
    """Command echo without flags that must not change report bytes."""
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok in _NOT_ECHOED:
            skip = True
            continue
        if tok.startswith(tuple(f + "=" for f in _NOT_ECHOED)):
            continue
        out.append(tok)
    return out


def _report(args, e=None, **fields) -> dict:
    rep = {"command": args.command, "argv": _echo(getattr(args, "argv", [])),
           "tool": f"radner {__version__}", "seed": getattr(args, "seed", 0)}
    if e is not None:
        rep["digest"] = digest(e)
    rep.update(fields)
    return rep


def _emit(args, report: dict, started: float) -> None:
    if getattr(args, "timing", False):
        report["wall_time"] = round(time.perf_counter() - started, 6)
    text = canonical_json(report)
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load(args):
    try:
        ef = load_economy(args.file, strict=args.strict)
    except OSError as exc:
        raise UsageError(f"cannot read {args.file}: {exc.strerror}") from None
    for w in ef.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return ef


def _allocation(args, ef, allow_solve: bool = False):
    """Embedded name, external JSON file, the only embedded allocation, or
    (when allowed) the solved equilibrium."""
    e = ef.economy
    name = getattr(args, "allocation", None)
    if name is None:
        if len(ef.allocations) == 1:
            return next(iter(ef.allocations.values()))
        if allow_solve:
            return None
        raise UsageError("no allocation given and the file does not embed exactly one")
    if name in ef.allocations:
        return ef.allocations[name]
    if os.path.exists(name):
        try:
            with open(name, encoding="utf-8") as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{name}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
        if isinstance(data, dict):
            data = data.get("allocation")
        return allocation_from_blocks(e, data, name)
    raise UsageError(f"unknown allocation {name!r}")


class InfeasibleInput(Exception):
    pass


def _admissible(e, x):
    try:
        x = as_allocation(e, x)
    except EconomyError as exc:
        raise InfeasibleInput(str(exc)) from None
    if not is_feasible(e, x, 1e-9):
        raise InfeasibleInput("allocation exceeds the aggregate endowment")
    return x


def _residual_table(e, cert) -> dict:
    return {
        "budget": [float(v) for v in cert.budget_residuals],
        "utility_gap": [float(v) for v in cert.utility_gaps],
        "value_clearing": float(cert.clearing_residual_value),
        "state_value": {e.states.labels[s]: float(v) for s, v in enumerate(cert.per_state_value_residuals)},
    }


def cmd_solve(args) -> tuple[int, dict]:
    ef = _load(args)
    e = ef.economy
    audit = audit_assumptions(e)
    if not audit.a4:
        return EXIT_AUDIT, _report(args, e, audit=audit.as_dict(), result="audit failed: A4")
    cfg = SolverConfig(verify_tol=args.tol, seed=args.seed, threads=args.threads or 1)
    try:
        cert = solve_equilibrium(e, cfg)
    except NoCertificate as exc:
        return EXIT_NOCERT, _report(args, e, result="no certificate", detail=str(exc),
                                    diagnostics=json.loads(json.dumps(exc.diagnostics, default=str)))
    full = True
    try:
        verify_equilibrium(e, cert.allocation, cert.prices, args.tol, quasi=False)
    except EquilibriumRejected:
        full = False
    upgrade = quasi_to_full_upgrade_check(e, cert, args.tol)
    rep = _report(args, e, audit=audit.as_dict(),
                  result="equilibrium" if full and not cert.quasi_only else "quasi-equilibrium",
                  quasi_only=cert.quasi_only, nontrivial=cert.nontrivial,
                  prices=[[float(v) for v in row] for row in cert.prices],
                  allocation=allocation_to_blocks(e, cert.allocation),
                  residuals=_residual_table(e, cert), iterations=cert.iterations,
                  upgrade=upgrade.status)
    return (EXIT_OK if full and not cert.quasi_only else EXIT_QUASI), rep


def cmd_core(args) -> tuple[int, dict]:
    ef = _load(args)
    e = ef.economy
    x = _admissible(e, _allocation(args, ef))
    policy = parse_policy(args.policy)
    provenance = policy.describe() if args.mode == "aubin" else args.mode
    try:
        if args.mode == "private":
            verdict = private_core_membership(e, x, args.tol, args.threads)
            if verdict.status == "indeterminate":
                return EXIT_NOCERT, _report(args, e, mode=args.mode, result="indeterminate")
            cert = verdict.certificate
            extra = {"coalitions_checked": len(verdict.results)}
        elif args.mode == "aubin":
            cert, extra = aubin_block(e, x, policy, args.tol), {}
        elif args.mode == "expost":
            w = ex_post_block(e, x, args.tol)
            if w is None:
                return EXIT_OK, _report(args, e, mode=args.mode, result=f"none-found({provenance})")
            return EXIT_FOUND, _report(args, e, mode=args.mode, result="blocked",
                                       coalition=list(w.coalition),
                                       states=[e.states.labels[s] for s in w.states],
                                       certificates={e.states.labels[s]: certificate_to_dict(c)
                                                     for s, c in w.certificates.items()})
        else:
            cert, extra = fine_dominate(e, x, args.mode == "weakfine", args.tol), {}
    except SolverIndeterminate as exc:
        return EXIT_NOCERT, _report(args, e, mode=args.mode, result="indeterminate", detail=str(exc))
    if cert is None:
        return EXIT_OK, _report(args, e, mode=args.mode, result=f"none-found({provenance})", **extra)
    return EXIT_FOUND, _report(args, e, mode=args.mode, result="blocked",
                               certificate=certificate_to_dict(cert),
                               revalidation=certificate_problems(e, x, cert), **extra)


def _measures(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad --epsilon list {text!r}") from None
    if not vals or any(not 0 < v < 1 for v in vals):
        raise UsageError("every --epsilon value must lie in (0, 1)")
    return vals


def cmd_vind(args) -> tuple[int, dict]:
    measures = _measures(args.epsilon)
    ef = _load(args)
    e = ef.economy
    x = _admissible(e, _allocation(args, ef))
    try:
        verdict = private_core_membership(e, x, args.tol, args.threads)
    except SolverIndeterminate as exc:
        return EXIT_NOCERT, _report(args, e, result="indeterminate", detail=str(exc))
    if verdict.certificate is None:
        code = EXIT_NOCERT if verdict.status == "indeterminate" else EXIT_FOUND
        return code, _report(args, e, result="nothing to resize")
    try:
        shrunk = lemma_shrink(e, verdict.certificate, x)
    except ContinuumError as exc:
        return EXIT_NOCERT, _report(args, e, result="shrink failed", detail=str(exc))
    out = []
    for m in measures:
        try:
            c = resize_to_measure(e, shrunk, x, m)
        except ContinuumError as exc:
            out.append({"measure": m, "error": str(exc)})
            continue
        out.append({"measure": m, "mass": c.mass, "certificate": certificate_to_dict(c),
                    "residuals": continuum_residuals(e, c, x)})
    return EXIT_OK, _report(args, e, result="resized", blocking=certificate_to_dict(verdict.certificate),
                            shrunk=certificate_to_dict(shrunk), resized=out)


def cmd_verify(args) -> tuple[int, dict]:
    ef = _load(args)
    e = ef.economy
    try:
        grid = RGrid.parse(args.r_grid, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    policy = parse_policy(args.policy)
    if args.theorem == "p2":
        rep = check_proposition2(e, SolverConfig(verify_tol=args.tol), args.tol)
    else:
        x = _allocation(args, ef, allow_solve=True)
        if x is None:
            if not audit_assumptions(e).a4:
                return EXIT_AUDIT, _report(args, e, result="audit failed: A4")
            try:
                x = solve_equilibrium(e, SolverConfig(verify_tol=args.tol)).allocation
            except NoCertificate as exc:
                return EXIT_NOCERT, _report(args, e, result="no certificate", detail=str(exc))
        x = _admissible(e, x) if args.theorem != "c5" else np.asarray(x, dtype=float)
        try:
            if args.theorem == "5":
                rep = check_theorem5(e, x, policy, args.tol)
            elif args.theorem == "6":
                rep = check_theorem6(e, x, grid, args.tol, args.threads)
            elif args.theorem == "7":
                rep = check_theorem7(e, x, grid, args.tol, args.threads)
            elif args.theorem == "8":
                rep = check_theorem8(e, x, grid, args.tol, args.threads)
            else:
                rep = check_corollary5(e, x, grid, args.tol, args.threads)
        except EconomyError as exc:
            raise InfeasibleInput(str(exc)) from None
    codes = {CONFIRMED: EXIT_OK, COUNTEREXAMPLE: EXIT_FOUND, INDETERMINATE: EXIT_NOCERT,
             UNMET: EXIT_AUDIT}
    return codes[rep.verdict], _report(args, e, report=rep.as_dict())


def cmd_generate(args) -> tuple[int, Optional[str]]:
    try:
        e = generate(args.seed, args.n, args.l, args.states, args.profile)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return EXIT_OK, dump_economy(e)


def cmd_chart(args) -> tuple[int, str]:
    fams = SPACE_FAMILIES if args.space == "all" else (args.space,)
    lines = []
    for fam in fams:
        p = args.p if fam in ("ell_p", "L_p") else None
        if args.space == "all" and p is None and fam in ("ell_p", "L_p"):
            p = 1.0
        try:
            c = classify_space(SpaceDescriptor(fam, p))
        except LatticeError as exc:
            raise UsageError(str(exc)) from None
        line = format_classification(c)
        lines.append(f"{fam}: {line}" if args.space == "all" else line)
    return EXIT_OK, "\n".join(lines) + "\n"


COMMANDS = {"solve": cmd_solve, "core": cmd_core, "vind": cmd_vind, "verify": cmd_verify}


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    started = time.perf_counter()
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        args.argv = argv
        if getattr(args, "threads", None) is None and hasattr(args, "threads"):
            args.threads = default_threads()
        if args.command in ("generate", "chart"):
            fn = cmd_generate if args.command == "generate" else cmd_chart
            code, text = fn(args)
            if getattr(args, "out", None):
                with open(args.out, "w", encoding="utf-8") as fh:
                    fh.write(text)
            else:
                sys.stdout.write(text)
            return code
        code, report = COMMANDS[args.command](args)
        _emit(args, report, started)
        return code
    except UsageError as exc:
        print(f"radner: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"radner: parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleInput as exc:
        print(f"radner: inadmissible allocation: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
