"""Command-line entry point: ``graphdtn <subcommand> [flags]``.

Primary artifacts (CSV or JSON) go to ``--out`` or standard output. When a
solve writes its CSV to ``--out``, a JSON summary goes to standard output.
Errors are single-line JSON objects on standard error. Exit codes: 0
success, 1 input or validation error, 2 solver non-convergence.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import diagnostics, dtn, io
from .besov import FunctionalError, besov_kernel
from .config import SolverConfig
from .generators import KINDS, generate
from .graph import GraphError, validate
from .solvers import SolverError, solve_dirichlet, solve_neumann

COMMANDS = ("validate", "diagnose", "dirichlet", "neumann", "dtn", "ntd", "norms", "roundtrip", "gen")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphdtn", description="p-Laplacian boundary problems on metric measure graphs")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}", parser_class=_Parser)
    sub.required = True

    def add(name, help_, data=False, besov=False):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--graph", required=True, help="graph JSON file")
        if data:
            sp.add_argument("--data", required=True, help="function CSV (id,value or id,weight)")
        sp.add_argument("--p", type=float, help="exponent (overrides the file)")
        if besov:
            g = sp.add_mutually_exclusive_group()
            g.add_argument("--theta", type=float, help="Besov smoothness (overrides the file)")
            g.add_argument("--Theta", type=float, help="codimension (overrides the file)")
        sp.add_argument("--tol", type=float, default=1e-10, help="relative gradient tolerance")
        sp.add_argument("--max-iter", type=int, default=200, help="Newton iterations in the exact stage")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--restarts", type=int, default=16, help="starts per norm search")
        sp.add_argument("--renormalize", action="store_true",
                        help="subtract the mean of a functional instead of rejecting it")
        sp.add_argument("--out", help="output path (default: standard output)")
        return sp

    add("validate", "check graph invariants")
    d = add("diagnose", "doubling, codimension and Poincare constants")
    d.add_argument("--emit-plot-data", metavar="PATH", help="write the radius scan as x,y CSV")
    add("dirichlet", "p-harmonic extension of boundary data", data=True)
    add("neumann", "Neumann solution for a boundary functional", data=True)
    add("dtn", "Dirichlet-to-Neumann map", data=True)
    add("ntd", "Neumann-to-Dirichlet map", data=True)
    add("norms", "trace, extension, DtN and NtD norms with bound verdicts", besov=True)
    r = add("roundtrip", "NtD(DtN f) and DtN(NtD l) errors on random data", besov=True)
    r.add_argument("--trials", type=int, default=10)
    g = sub.add_parser("gen", help="generate a test domain")
    g.add_argument("kind", choices=KINDS)
    g.add_argument("size", type=int)
    g.add_argument("--p", type=float, default=2.0)
    tg = g.add_mutually_exclusive_group()
    tg.add_argument("--theta", type=float)
    tg.add_argument("--Theta", type=float)
    g.add_argument("--out")
    return parser


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args, block) -> SolverConfig:
    p = args.p if args.p is not None else block.get("p")
    if p is None:
        raise GraphError("no exponent p given (file params or --p)")
    return SolverConfig(p=float(p), grad_tol=args.tol, max_iter=args.max_iter,
                        seed=args.seed, restarts=args.restarts)


def _load(args):
    graph, block = io.load_graph(args.graph)
    if args.command != "validate":
        validate(graph).raise_if_failed()
    return graph, block


def _summary(res, extra=None) -> str:
    out = {"energy": res.energy, "objective": res.objective, "el_residual": res.el_residual,
           "iterations": res.iterations, "converged": res.converged}
    out.update(extra or {})
    return io.dump_json(out)


def _solution_output(args, text, summary):
    if args.out:
        Path(args.out).write_text(text)
        sys.stdout.write(summary)
    else:
        sys.stdout.write(text)


def run(args) -> int:
    if args.command == "gen":
        params = {"p": args.p}
        if args.theta is not None:
            params["theta"] = args.theta
        else:
            params["Theta"] = 1.0 if args.Theta is None else args.Theta
        _emit(io.dump_json(generate(args.kind, args.size, params)), args.out)
        return 0

    graph, block = _load(args)
    if args.command == "validate":
        rep = validate(graph)
        _emit(io.dump_json(asdict(rep)), args.out)
        return 0 if rep.ok else 1

    cfg = _config(args, block)
    if args.command == "diagnose":
        fit = diagnostics.codimension_fit(graph)
        poinc = diagnostics.poincare_constant(graph, cfg.p, cfg)
        report = {
            "doubling_mu": diagnostics.doubling_constant(graph, "mu"),
            "doubling_nu": diagnostics.doubling_constant(graph, "nu"),
            "codimension": fit._asdict(),
            "poincare": {"value": poinc.value, "certified": poinc.certified, "p": cfg.p},
        }
        _emit(io.emit_report(report).decode(), args.out)
        if args.emit_plot_data:
            r, y = diagnostics.radius_scan(graph)
            Path(args.emit_plot_data).write_text(io.series_csv(r, y))
        return 0

    if args.command in ("dirichlet", "dtn"):
        _, values = io.read_function(args.data)
        f = graph.boundary_function(values)
        if args.command == "dirichlet":
            res = solve_dirichlet(f, graph, cfg)
            _solution_output(args, io.function_csv(graph.ids, res.u), _summary(res))
        else:
            ell, res = dtn.dtn_apply(f, graph, cfg, return_solution=True)
            _solution_output(args, io.function_csv(graph.boundary_ids, ell, "weight"), _summary(res))
        return 0

    if args.command in ("neumann", "ntd"):
        _, values = io.read_function(args.data)
        ell = graph.boundary_function(values)
        if args.command == "neumann":
            res = solve_neumann(ell, graph, cfg, renormalize=args.renormalize)
            _solution_output(args, io.function_csv(graph.ids, res.u), _summary(res))
        else:
            f, res = dtn.ntd_apply(ell, graph, cfg, renormalize=args.renormalize, return_solution=True)
            _solution_output(args, io.function_csv(graph.boundary_ids, f), _summary(res))
        return 0

    params = io.params_from(block, cfg.p, args.theta, args.Theta)
    if args.command == "norms":
        report = dtn.bounds_report(graph, params, cfg)
        _emit(io.emit_report(report).decode(), args.out)
        return 0
    if args.command == "roundtrip":
        rt = dtn.roundtrip_check(graph, besov_kernel(graph, params), cfg, args.trials)
        _emit(io.dump_json(asdict(rt)), args.out)
        return 0
    raise UsageError(f"unknown command {args.command!r}")


def _error(kind: str, message: str, **extra) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(parser.format_usage())
        _error("usage", str(exc))
        return 1
    try:
        return run(args)
    except SolverError as exc:
        _error("nonconvergence", str(exc), el_residual=exc.result.el_residual)
        return 2
    except (GraphError, FunctionalError, UsageError, ValueError, OSError) as exc:
        _error("input", str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
