"""Discrete Morse commands: triangulate, homology, morse, arnold-demo."""

import argparse
from pathlib import Path

from core.data_loader import TRIANGULATIONS
from core.morse import (
    STRATEGIES,
    arnold_demo,
    build_simplicial,
    cell_name,
    discrete_gradient,
    euler_characteristic,
    export_document,
    morse_complex,
    morse_inequalities,
    morse_numbers,
    simplicial_homology,
)
from core.reports import Report


def _compute_triangulate(args: argparse.Namespace, report: Report) -> None:
    X = build_simplicial(args.name)
    report.result.update({
        "space": args.name,
        "description": TRIANGULATIONS[args.name].get("description", ""),
        "dimension": X.dimension,
        "f_vector": X.f_vector(),
        "euler": euler_characteristic(X),
        "maximal": [list(s) for s in X.maximal],
    })


def _compute_homology(args: argparse.Namespace, report: Report) -> None:
    X = build_simplicial(args.name)
    H = simplicial_homology(X)
    report.result.update({
        "space": args.name,
        "homology": H.to_dict(),
        "cohomology": H.to_cohomology().to_dict(),
    })


def _compute_morse(args: argparse.Namespace, report: Report) -> None:
    X = build_simplicial(args.name)
    V = discrete_gradient(X, args.strategy)
    M = morse_complex(X, V)
    oracle = simplicial_homology(X)
    agrees = M.homology().same_as(oracle)
    rows = morse_inequalities(M, oracle)
    numbers = morse_numbers(M)
    report.result.update({
        "space": args.name,
        "strategy": args.strategy,
        "pairs": len(V.pairs),
        "critical": [cell_name(c) for c in M.critical],
        "morse_numbers": {str(k): n for k, n in numbers.items()},
        "counts": {f"{cell_name(a)}->{cell_name(b)}": n for (a, b), n in sorted(M.counts.items())},
        "paths": {f"{cell_name(a)}->{cell_name(b)}": n for (a, b), n in sorted(M.paths.items())},
        "d_squared_zero": M.d_squared_zero(),
        "homology": M.homology().to_dict(),
        "oracle_agrees": agrees,
        "inequalities": [
            {"degree": r.degree, "critical": r.critical, "bound": r.bound, "holds": r.holds} for r in rows
        ],
    })
    if not agrees:
        report.add("OracleMismatch", "Morse homology differs from simplicial homology.")
    if not M.d_squared_zero():
        report.add("DSquaredNonzero", "The Morse boundary does not square to zero.")
    for r in rows:
        if not r.holds:
            report.add("MorseInequality", f"Degree {r.degree} has {r.critical} critical cells, fewer than {r.bound}.",
                       witness=r.degree)
    if args.export:
        Path(args.export).write_text(export_document(M), encoding="utf-8")
        report.result["exported"] = args.export


def _compute_arnold_demo(args: argparse.Namespace, report: Report) -> None:
    result = arnold_demo(args.name, args.strategy)
    report.result.update(result.to_dict())
    if not result.holds:
        report.add("BelowMinimalRank", f"{result.critical} critical cells are fewer than {result.min_rank}.",
                   witness=[result.critical, result.min_rank])
    if not result.oracle_agrees:
        report.add("OracleMismatch", "Flow-category cohomology differs from the simplicial oracle.")
    if not result.d_squared_zero:
        report.add("DSquaredNonzero", "The Morse flow category does not assemble to a complex.")


def register(subparsers, common: argparse.ArgumentParser) -> None:
    """Add the discrete Morse subcommands."""
    names = sorted(TRIANGULATIONS)
    for name, handler, help_text in (
        ("triangulate", _compute_triangulate, "Describe a bundled triangulation."),
        ("homology", _compute_homology, "Integral homology by Smith normal form."),
        ("morse", _compute_morse, "Discrete gradient, critical cells and Morse complex."),
        ("arnold-demo", _compute_arnold_demo, "Run a bundled space through the minimal-rank pipeline."),
    ):
        p = subparsers.add_parser(name, parents=[common], help=help_text)
        p.add_argument("name", choices=names)
        if name in ("morse", "arnold-demo"):
            p.add_argument("--strategy", choices=STRATEGIES, default=STRATEGIES[0])
        if name == "morse":
            p.add_argument("--export", default=None, help="Write the Morse flow category document here.")
        p.set_defaults(handler=handler)
