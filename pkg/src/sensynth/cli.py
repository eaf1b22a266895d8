"""Command-line front end.

Exit codes: 0 Realizable, 1 Unrealizable, 2 Unknown, 3 runtime error
(I/O, parse, invalid model), 4 usage error.  Human-readable reports go to
stdout; machine-readable documents (result, CSV, DIMACS, models) go to the
given output files so golden tests stay stable.
"""

from __future__ import annotations

import argparse
import os
import re
import sys
from dataclasses import dataclass, replace
from fractions import Fraction

from . import bench
from .encode import SideConstraints, encode, parse_constraints
from .model import ModelError, parse_pomdp, print_pomdp
from .sat import Budget, ExternalSolverError, write_dimacs
from .synth import (ResultParseError, format_frontier_csv, format_result,
                    parse_result, sweep, synthesize)
from .verify import build_product, check_almost_sure, format_certificate

EXIT_REALIZABLE = 0
EXIT_UNREALIZABLE = 1
EXIT_UNKNOWN = 2
EXIT_ERROR = 3
EXIT_USAGE = 4

_VERDICT_EXIT = {"Realizable": EXIT_REALIZABLE, "Unrealizable": EXIT_UNREALIZABLE,
                 "Unknown": EXIT_UNKNOWN}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage; remap onto our code space
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    """One command invocation: which model, which parameters, where output goes."""

    subcommand: str
    input: str = ""
    mu: int = 1
    nu: int = 0
    k: int | None = None
    deterministic: bool = False
    strict: bool = False
    constraints: str | None = None
    solver: str | None = None
    seed: int = 0
    result: str | None = None
    out: str | None = None
    quiet: bool = False
    sym_break: bool = True
    render_grid: bool = False
    max_conflicts: int | None = None
    max_seconds: float | None = None

    def __post_init__(self):
        if self.mu < 1:
            raise UsageError("--mu must be >= 1")
        if self.nu < 0:
            raise UsageError("--nu must be >= 0")

    def check_k(self, p):
        bound = p.n_states * self.mu
        if self.k is not None and not 1 <= self.k <= bound:
            raise UsageError(f"--k must be in 1..{bound} for this model")

    def budget(self):
        if self.max_conflicts is None and self.max_seconds is None:
            return None
        return Budget(max_conflicts=self.max_conflicts, max_seconds=self.max_seconds)


def _read(path):
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _write(path, text):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def _load_model(cfg):
    p = parse_pomdp(_read(cfg.input))
    cfg.check_k(p)
    sc = None
    if cfg.constraints:
        sc = parse_constraints(_read(cfg.constraints), p)
    return p, sc


def _synth_call(cfg, p, sc):
    return synthesize(p, cfg.mu, cfg.nu, k=cfg.k, deterministic=cfg.deterministic,
                      strict=cfg.strict, constraints=sc, budget=cfg.budget(),
                      solver=cfg.solver, seed=cfg.seed, sym_break=cfg.sym_break)


_CELL_RE = re.compile(r"^c(\d+)_(\d+)(?:_[NESW])?$")


def render_grid(out):
    """ASCII map of a grid model, one letter per synthesized observation class.

    Works for states named c{x}_{y} or c{x}_{y}_{heading}; cells whose states
    disagree on the class (heading variants) show '?', non-cells show '#'.
    """
    m, comp = out.model, out.completion
    cells = {}
    for s, name in enumerate(m.states):
        hit = _CELL_RE.match(name)
        if hit:
            cells.setdefault((int(hit.group(1)), int(hit.group(2))), []).append(s)
    if not cells:
        return "grid rendering needs c{x}_{y} state names"
    classes = {}
    letters = "abcdefghijklmnopqrstuvwxyz"
    lines = []
    for y in range(max(c[1] for c in cells), -1, -1):
        row = []
        for x in range(max(c[0] for c in cells) + 1):
            states = cells.get((x, y))
            if not states:
                row.append("#")
                continue
            supports = {comp.support(s) for s in states}
            if len(supports) > 1:
                row.append("?")
                continue
            key = supports.pop()
            if key not in classes:
                classes[key] = letters[len(classes) % len(letters)]
            row.append(classes[key])
        lines.append("".join(row))
    return "\n".join(lines)


def cmd_synth(cfg):
    p, sc = _load_model(cfg)
    out = _synth_call(cfg, p, sc)
    doc = format_result(out)
    if cfg.result:
        _write(cfg.result, doc)
    if not cfg.quiet:
        st = out.stats
        print(f"verdict: {out.verdict} (mu={out.mu} nu={out.nu} k={out.k})")
        print(f"stats: vars={st.vars} clauses={st.clauses} time_ms={st.time_ms}")
        if out.verdict == "Unknown":
            print(f"reason: {out.reason}")
        if out.verdict == "Realizable":
            if not cfg.result:
                print(doc, end="")
            if cfg.render_grid:
                print(render_grid(out))
    return _VERDICT_EXIT[out.verdict]


def cmd_verify(cfg, document):
    p = parse_pomdp(_read(cfg.input))
    doc = parse_result(_read(document), p)
    if doc.completion is None or doc.policy is None:
        raise ResultParseError(f"document has verdict {doc.verdict}, nothing to verify")
    prod = build_product(p, doc.completion, doc.policy)
    cert = check_almost_sure(prod)
    if not cfg.quiet:
        print(format_certificate(cert, p, doc.policy))
    return EXIT_REALIZABLE if cert.ok else EXIT_UNREALIZABLE


def _parse_range(text):
    lo, _, hi = text.partition("..")
    try:
        lo = int(lo)
        hi = int(hi) if hi else lo
    except ValueError:
        raise UsageError(f"bad range {text!r}, expected N or N..M")
    if hi < lo:
        raise UsageError(f"empty range {text!r}")
    return range(lo, hi + 1)


def cmd_sweep(cfg, mu_range, nu_range):
    p, sc = _load_model(cfg)
    rows = sweep(p, mu_range, nu_range, k=cfg.k, deterministic=cfg.deterministic,
                 strict=cfg.strict, constraints=sc, budget=cfg.budget(),
                 solver=cfg.solver, seed=cfg.seed, sym_break=cfg.sym_break)
    csv = format_frontier_csv(rows)
    if cfg.out:
        _write(cfg.out, csv)
        if not cfg.quiet:
            for r in rows:
                print(f"mu={r.mu} nu={r.nu} {r.verdict}")
    else:
        print(csv, end="")
    return EXIT_REALIZABLE


_FAMILIES = ("fig1", "det-hallway", "escape", "rocksample", "hallway")


def cmd_gen(family, args):
    try:
        if family == "fig1":
            p = bench.gen_fig1()
        elif family == "det-hallway":
            p = bench.gen_det_hallway()
        elif family == "escape":
            p = bench.gen_escape(args.n)
        elif family == "rocksample":
            p = bench.gen_rocksample(args.n)
        else:
            spec = bench.GridSpec.from_ascii(_read(args.layout), p_fail=Fraction(args.p_fail),
                                             oriented=args.oriented, heading=args.heading)
            p = bench.gen_hallway(spec)
    except (ValueError, ZeroDivisionError) as e:
        # bad size, bad layout, bad fraction: all argument problems
        raise UsageError(str(e))
    text = print_pomdp(p)
    if args.out:
        _write(args.out, text)
        print(f"{family}: {p.n_states} states, {p.n_actions} actions -> {args.out}")
    else:
        print(text, end="")
    return EXIT_REALIZABLE


def cmd_export_dimacs(cfg):
    p, sc = _load_model(cfg)
    cnf, vm = encode(p, cfg.mu, cfg.nu, cfg.k if cfg.k else p.n_states * cfg.mu,
                     sc=_merged_sc(cfg, sc), sym_break=cfg.sym_break)
    out = cfg.out or os.path.splitext(os.path.basename(cfg.input))[0] + ".cnf"
    write_dimacs(cnf, out)
    with open(out + ".map", "w", encoding="utf-8") as fh:
        for v in range(1, vm.n_semantic + 1):
            fh.write(f"{v} {vm.var_name(v)}\n")
    if not cfg.quiet:
        print(f"{cnf.nvars} vars ({vm.n_semantic} semantic), {len(cnf)} clauses -> {out}")
    return EXIT_REALIZABLE


def _merged_sc(cfg, sc):
    if sc is None:
        sc = SideConstraints()
    return replace(sc, deterministic=sc.deterministic or cfg.deterministic,
                   strict=sc.strict or cfg.strict)


def _add_common(sp, model_arg=True):
    if model_arg:
        sp.add_argument("input", help="model file")
    sp.add_argument("--mu", type=int, default=1, help="memory elements (>= 1)")
    sp.add_argument("--nu", type=int, default=0, help="fresh observations allowed (>= 0)")
    sp.add_argument("--k", type=int, default=None, help="path bound (default |S|*mu)")
    sp.add_argument("--deterministic", action="store_true",
                    help="require a deterministic completion")
    sp.add_argument("--strict", action="store_true",
                    help="forbid dropping given observation mass")
    sp.add_argument("--constraints", metavar="FILE", help="side constraint file")
    sp.add_argument("--solver", default=os.environ.get("SENSYNTH_SOLVER"),
                    help="'embedded' or an external command template with {input} "
                         "(default: SENSYNTH_SOLVER or embedded)")
    sp.add_argument("--seed", type=int, default=0, help="solver tie-breaking seed")
    sp.add_argument("--max-conflicts", type=int, default=None)
    sp.add_argument("--max-seconds", type=float, default=None)
    sp.add_argument("--no-symmetry", action="store_true",
                    help="disable memory symmetry breaking")
    sp.add_argument("--quiet", action="store_true", help="suppress the report")


def _cfg(ns, subcommand, **extra):
    return RunConfig(subcommand=subcommand, input=getattr(ns, "input", ""),
                     mu=ns.mu, nu=ns.nu, k=ns.k, deterministic=ns.deterministic,
                     strict=ns.strict, constraints=ns.constraints, solver=ns.solver,
                     seed=ns.seed, quiet=ns.quiet, sym_break=not ns.no_symmetry,
                     max_conflicts=ns.max_conflicts, max_seconds=ns.max_seconds,
                     **extra)


def build_parser():
    ap = _Parser(prog="sensynth",
                 description="Synthesize sensors and finite-memory controllers "
                             "for almost-sure reachability in POMDPs.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sp = sub.add_parser("synth", help="decide one (mu, nu) instance")
    _add_common(sp)
    sp.add_argument("--result", metavar="FILE", help="write the result document here")
    sp.add_argument("--render-grid", action="store_true",
                    help="ASCII map of the observation classes (grid models)")

    sp = sub.add_parser("verify", help="check a result document against a model")
    sp.add_argument("input", help="model file")
    sp.add_argument("document", help="result document from synth")
    sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("sweep", help="tabulate verdicts over (mu, nu) ranges")
    _add_common(sp)
    sp.add_argument("--mu-range", metavar="N..M", help="overrides --mu")
    sp.add_argument("--nu-range", metavar="N..M", help="overrides --nu")
    sp.add_argument("--csv", metavar="FILE", help="write the CSV here (else stdout)")

    sp = sub.add_parser("gen", help="write a benchmark model")
    sp.add_argument("family", choices=_FAMILIES)
    sp.add_argument("--n", type=int, default=2, help="size parameter (escape, rocksample)")
    sp.add_argument("--layout", metavar="FILE", help="ASCII grid (hallway)")
    sp.add_argument("--p-fail", default="0", help="action failure probability (hallway)")
    sp.add_argument("--oriented", action="store_true", help="heading-carrying states (hallway)")
    sp.add_argument("--heading", default="N", choices=("N", "E", "S", "W"))
    sp.add_argument("--out", metavar="FILE", help="output path (else stdout)")

    sp = sub.add_parser("export-dimacs", help="write the CNF and a variable map")
    _add_common(sp)
    sp.add_argument("--out", metavar="FILE", help="output path (default <model>.cnf)")
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
        if ns.cmd == "synth":
            cfg = _cfg(ns, "synth", result=ns.result, render_grid=ns.render_grid)
            return cmd_synth(cfg)
        if ns.cmd == "verify":
            cfg = RunConfig(subcommand="verify", input=ns.input, quiet=ns.quiet)
            return cmd_verify(cfg, ns.document)
        if ns.cmd == "sweep":
            cfg = _cfg(ns, "sweep", out=ns.csv)
            mu_range = _parse_range(ns.mu_range) if ns.mu_range else [ns.mu]
            nu_range = _parse_range(ns.nu_range) if ns.nu_range else [ns.nu]
            return cmd_sweep(cfg, mu_range, nu_range)
        if ns.cmd == "gen":
            if ns.family == "hallway" and not ns.layout:
                raise UsageError("hallway needs --layout FILE")
            return cmd_gen(ns.family, ns)
        cfg = _cfg(ns, "export-dimacs", out=ns.out)
        return cmd_export_dimacs(cfg)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, ResultParseError, ExternalSolverError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
