"""Command line front end.  Exit codes: 0 ok, 1 bad input, 2 failed internal check."""

from __future__ import annotations

import argparse
import json
import sys
from fractions import Fraction

from .assembler import SourceError, assemble_detailed, load_source
from .bv_toy import ToyError, load_fixture, rg_check
from .graph_kit import (GraphError, StableGraph, admissible_partition_graphs, canonical_class,
                        enumerate_graphs)
from .heat_asymptotics import HeatError, verify_all
from .weight_system import TargetError, load_target, rw_class
from .weyl_algebra import (ConnectionData, WeylError, fedosov_solve, flatness_residual)

INPUT_ERRORS = (WeylError, GraphError, TargetError, SourceError, ToyError, HeatError, OSError)


class CheckFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _emit(args, payload: dict, text: str) -> None:
    if args.output == "json":
        print(json.dumps(payload, indent=2, default=str))
    else:
        print(text)


def cmd_fedosov(args) -> int:
    with open(args.curvature) as fh:
        conn = ConnectionData.from_text(fh.read(), cutoff=args.cutoff)
    if conn.n != args.n:
        raise WeylError(f"curvature file has n={conn.n}, expected --n {args.n}")
    conn.validate()
    I = fedosov_solve(conn, args.cutoff)
    res = flatness_residual(I, conn)
    payload = {"n": conn.n, "cutoff": args.cutoff, "terms": len(I.terms),
               "I": I.to_text(), "residual_terms": len(res.terms),
               "flat": res.is_zero()}
    text = I.to_text().rstrip("\n") + \
        f"\n# residual mod hbar up to weight {args.cutoff - 1}: {len(res.terms)} terms"
    _emit(args, payload, text)
    return 0


def _class_rows(classes) -> list:
    return [{"key": c.key, "aut": c.aut} for c in classes]


def cmd_graphs_enumerate(args) -> int:
    vals = [args.valency] * args.vertices
    classes = enumerate_graphs(vals, args.tails, connected=not args.disconnected,
                               allow_loops=not args.no_loops)
    rows = _class_rows(classes)
    text = "\n".join(f"{r['key']}    |Aut| = {r['aut']}" for r in rows)
    _emit(args, {"count": len(rows), "classes": rows}, f"{text}\n# {len(rows)} classes")
    return 0


def cmd_graphs_partition(args) -> int:
    classes = admissible_partition_graphs(args.n, args.b1)
    rows = _class_rows(classes)
    text = "\n".join(f"{r['key']}    |Aut| = {r['aut']}" for r in rows)
    _emit(args, {"count": len(rows), "classes": rows}, f"{text}\n# {len(rows)} classes")
    return 0


def cmd_weights(args) -> int:
    with open(args.graph) as fh:
        g = StableGraph.from_text(fh.read())
    target = load_target(args.target)
    cls = canonical_class(g)
    w = rw_class(g, target)
    _emit(args, {"key": cls.key, "aut": cls.aut, "rw": str(w)},
          f"{cls.key}\nrw = {w}\n|Aut| = {cls.aut}")
    return 0


def cmd_partition(args) -> int:
    target = load_target(args.target)
    source = load_source(args.source)
    res = assemble_detailed(target, source)
    lines = [str(res.total)]
    for c in res.contributions:
        lines.append(f"# {c.key}: rw={c.rw} I={c.analytic} |Aut|={c.aut} -> {c.value}")
    _emit(args, res.to_json(), "\n".join(lines))
    return 0


def cmd_rg_check(args) -> int:
    fix = load_fixture(args.fixture)
    report = rg_check(fix, args.hbar)
    ok = all(v == 0 for v in report.values())
    text = "\n".join(f"{'PASS' if v == 0 else 'FAIL'} {k} (residual terms: {v})"
                     for k, v in report.items())
    _emit(args, {"passed": ok, "residual_terms": report}, text)
    if not ok:
        raise CheckFailed("rg identities failed")
    return 0


def cmd_verify_heat(args) -> int:
    checks = verify_all()
    rows = [{"name": c.name, "passed": c.passed, "residual_terms": c.residual_terms,
             "detail": c.detail} for c in checks]
    text = "\n".join(
        f"{'PASS' if c.passed else 'FAIL'} {c.name} (residual terms: {c.residual_terms})"
        + (f" [{c.detail}]" if c.detail else "") for c in checks)
    _emit(args, {"passed": all(c.passed for c in checks), "checks": rows}, text)
    if not all(c.passed for c in checks):
        raise CheckFailed("heat asymptotics identities failed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rwk", description="Rozansky-Witten toolkit: Weyl algebra, graphs, "
                                        "weights, BV toy model and heat-kernel checks.")
    p.add_argument("--output", choices=("text", "json"), default="text")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    f = sub.add_parser("fedosov", help="solve the Fedosov recursion for a curvature file")
    f.add_argument("--n", type=int, required=True)
    f.add_argument("--cutoff", type=int, required=True)
    f.add_argument("--curvature", required=True)
    f.set_defaults(func=cmd_fedosov)

    g = sub.add_parser("graphs", help="graph enumeration")
    gs = g.add_subparsers(dest="graphs_command", parser_class=_Parser)
    gs.required = True
    ge = gs.add_parser("enumerate", help="isomorphism classes of graphs")
    ge.add_argument("--vertices", type=int, required=True)
    ge.add_argument("--tails", type=int, default=0)
    ge.add_argument("--valency", type=int, default=3)
    ge.add_argument("--disconnected", action="store_true")
    ge.add_argument("--no-loops", action="store_true")
    ge.set_defaults(func=cmd_graphs_enumerate)
    gp = gs.add_parser("partition-classes", help="graphs contributing to Z")
    gp.add_argument("--n", type=int, required=True)
    gp.add_argument("--b1", type=int, required=True)
    gp.set_defaults(func=cmd_graphs_partition)

    w = sub.add_parser("weights", help="weight of one graph")
    w.add_argument("--graph", required=True)
    w.add_argument("--target", required=True)
    w.set_defaults(func=cmd_weights)

    z = sub.add_parser("partition", help="assemble the partition function")
    z.add_argument("--target", required=True)
    z.add_argument("--source", required=True)
    z.set_defaults(func=cmd_partition)

    r = sub.add_parser("rg", help="BV toy model checks")
    rs = r.add_subparsers(dest="rg_command", parser_class=_Parser)
    rs.required = True
    rc = rs.add_parser("check")
    rc.add_argument("--fixture", required=True)
    rc.add_argument("--hbar", type=int, default=2)
    rc.set_defaults(func=cmd_rg_check)

    v = sub.add_parser("verify", help="symbolic identity checks")
    vs = v.add_subparsers(dest="verify_command", parser_class=_Parser)
    vs.required = True
    vh = vs.add_parser("heat-asymptotics")
    vh.set_defaults(func=cmd_verify_heat)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (CheckFailed, AssertionError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
