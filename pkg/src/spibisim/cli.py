"""Command-line front end.

Exit codes: 0 when the property holds, 1 when it fails, 2 on usage, parse or
well-formedness errors.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .bisim import (
    CheckConfig, RelationIllFormed, VerifiedUpToBound, bounded_distinguisher,
    check_relation, parse_rules,
)
from .bitrace import bitrace_consistent_bounded
from .formats import (
    load, read_bitrace, read_messages, read_process, read_relation, read_theory,
    write_theory,
)
from .process import print_agent, print_process, step, traces
from .syntax import SpiSyntaxError, parse_message, parse_process
from .theory import (
    compose_theories, is_consistent, is_consistent_oracle, normalize, prove_equiv,
    prove_synth,
)

OK, FAIL, ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def _msg(text: str, what: str):
    try:
        return parse_message(text)
    except SpiSyntaxError as e:
        raise SpiSyntaxError(f"{what}: {e.msg}", e.line, e.col) from None


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _read(path, reader):
    try:
        return load(path, reader)
    except SpiSyntaxError as e:
        raise SpiSyntaxError(f"{path}: {e.msg}", e.line, e.col) from None


# -- commands

def cmd_prove(a):
    gamma = _read(a.theory, read_theory)
    left, right = _msg(a.left, "--left"), _msg(a.right, "--right")
    d = prove_equiv(gamma, left, right)
    if d is None:
        return FAIL, f"not derivable: {left} <-> {right}"
    text = d.render()
    if a.emit_derivation:
        Path(a.emit_derivation).write_text(text + "\n")
    return OK, f"derivable: {left} <-> {right}\n{text}"


def cmd_synth(a):
    sigma = _read(a.messages, read_messages)
    goal = _msg(a.goal, "--goal")
    d = prove_synth(sigma, goal)
    if d is None:
        return FAIL, f"not synthesizable: {goal}"
    return OK, f"synthesizable: {goal}\n{d.render()}"


def cmd_normalize(a):
    return OK, write_theory(normalize(_read(a.theory, read_theory))).rstrip("\n")


def cmd_consistent(a):
    gamma = _read(a.theory, read_theory)
    verdict = is_consistent(gamma)
    lines = [verdict.describe()]
    ok = bool(verdict)
    if a.oracle:
        o = is_consistent_oracle(gamma, a.depth)
        lines.append(f"oracle (depth {a.depth}): {'consistent' if o else 'inconsistent'}")
        if o != ok:
            lines.append("warning: the oracle disagrees with the characterisation")
    return (OK if ok else FAIL), "\n".join(lines)


def cmd_compose(a):
    g = compose_theories(_read(a.left, read_theory), _read(a.right, read_theory))
    if g is None:
        return FAIL, "theories are not composable"
    return OK, write_theory(g).rstrip("\n")


def cmd_step(a):
    p = _read(a.process, read_process)
    out = [f"{act} -> {print_agent(ag)}" for act, ag in step(p)]
    return OK, "\n".join(out) if out else "no transitions"


def cmd_traces(a):
    p = _read(a.process, read_process)
    ts = traces(p, a.depth)
    return OK, "\n".join(" . ".join(str(x) for x in t) for t in ts) if ts else "no traces"


def cmd_check_bitrace(a):
    h = _read(a.bitrace, read_bitrace)
    theory_ok = is_consistent(h.theory())
    if not theory_ok:
        return FAIL, f"inconsistent theory: {theory_ok.describe()}"
    v = bitrace_consistent_bounded(h, a.subst_depth)
    return (OK if v else FAIL), v.describe()


def cmd_check_bisim(a):
    r = _read(a.relation, read_relation)
    contexts = []
    for spec in a.context or ():
        proc, _, dom = spec.partition(":")
        contexts.append((parse_process(proc), tuple(x for x in dom.split(",") if x)))
    cfg = CheckConfig(a.subst_depth, parse_rules(a.up_to or ""), a.budget, tuple(contexts))
    v = check_relation(r, cfg)
    if isinstance(v, RelationIllFormed):
        return ERROR, v.describe()
    return (OK if isinstance(v, VerifiedUpToBound) else FAIL), v.describe()


def cmd_distinguish(a):
    p = _read(a.left, read_process)
    q = _read(a.right, read_process)
    found = bounded_distinguisher(p, q, a.depth)
    if found is None:
        return OK, f"no distinguishing observer up to depth {a.depth}"
    obs, barb, trace = found
    return FAIL, (f"distinguished\n  observer: {print_process(obs)}\n  barb: {barb}\n"
                  f"  trace: {' . '.join(str(x) for x in trace)}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spibisim", description="Open bisimulation tools for the spi calculus.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("prove", help="decide M <-> N under a theory")
    s.add_argument("--theory", required=True)
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.add_argument("--emit-derivation", metavar="PATH")
    s.set_defaults(run=cmd_prove)

    s = sub.add_parser("synth", help="decide whether a message is synthesizable")
    s.add_argument("--messages", required=True)
    s.add_argument("--goal", required=True)
    s.set_defaults(run=cmd_synth)

    s = sub.add_parser("normalize", help="print the irreducible form of a theory")
    s.add_argument("--theory", required=True)
    s.set_defaults(run=cmd_normalize)

    s = sub.add_parser("consistent", help="check theory consistency")
    s.add_argument("--theory", required=True)
    s.add_argument("--oracle", action="store_true", help="also run the bounded oracle")
    s.add_argument("--depth", type=_nonneg, default=2)
    s.set_defaults(run=cmd_consistent)

    s = sub.add_parser("compose", help="compose two theories")
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.set_defaults(run=cmd_compose)

    s = sub.add_parser("step", help="list one-step transitions")
    s.add_argument("--process", required=True)
    s.set_defaults(run=cmd_step)

    s = sub.add_parser("traces", help="list action sequences")
    s.add_argument("--process", required=True)
    s.add_argument("--depth", type=_nonneg, default=2)
    s.set_defaults(run=cmd_traces)

    s = sub.add_parser("check-bitrace", help="bounded bi-trace consistency")
    s.add_argument("--bitrace", required=True)
    s.add_argument("--subst-depth", type=_nonneg, default=1)
    s.set_defaults(run=cmd_check_bitrace)

    s = sub.add_parser("check-bisim", help="check a candidate relation")
    s.add_argument("--relation", required=True)
    s.add_argument("--subst-depth", type=_nonneg, default=1)
    s.add_argument("--up-to", default="", help="comma-separated subset of eq,w,c,s,i,f,r,p")
    s.add_argument("--budget", type=_positive, default=3, help="up-to chain length bound")
    s.add_argument("--context", action="append", metavar="PROC:x,y",
                   help="parallel-context template and its substitution domain")
    s.set_defaults(run=cmd_check_bisim)

    s = sub.add_parser("distinguish", help="search for a distinguishing observer")
    s.add_argument("--left", required=True)
    s.add_argument("--right", required=True)
    s.add_argument("--depth", type=_nonneg, default=2)
    s.set_defaults(run=cmd_distinguish)
    return ap


def run(argv) -> tuple:
    """Parse ``argv`` and execute; returns ``(exit code, report)``."""
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return (e.code if isinstance(e.code, int) else ERROR), ""
    try:
        return args.run(args)
    except SpiSyntaxError as e:
        return ERROR, f"error: {e}"
    except OSError as e:
        return ERROR, f"error: cannot read {e.filename}: {e.strerror}"
    except (ValueError, RecursionError) as e:
        return ERROR, f"error: {e}"


def main(argv=None) -> int:
    code, report = run(sys.argv[1:] if argv is None else argv)
    if report:
        print(report)
    return code


if __name__ == "__main__":
    sys.exit(main())
