"""Stratified-space commands: double, collar, product, euler.

A space is given either as a strat_space document or by the name of a
bundled space (point, interval, square).
"""

import argparse

from core.documents import payload_of, read_document
from core.reports import Report
from core.strata import (
    BUNDLED,
    CombStratSpace,
    bundled_space,
    collar,
    double,
    euler_char,
    origin_counts,
    product,
    stratum_counts,
)


def load_space(source: str) -> CombStratSpace:
    if source in BUNDLED:
        return bundled_space(source)
    return read_document(source, ("strat_space",)).build()


def _counts(counts: dict) -> dict:
    return {",".join(str(s) for s in label) or "-": n for label, n in counts.items()}


def _compute_double(args: argparse.Namespace, report: Report) -> None:
    X = load_space(args.space)
    doubled, decoration = double(X)
    copies = {c.id: 2 ** len(c.label.S) for c in X.cells}
    report.result.update({
        "k": X.k,
        "cells": len(doubled.cells),
        "copies": copies,
        "euler": euler_char(doubled),
        "space": payload_of(doubled),
    })
    report.extend(decoration.check_action(doubled))
    report.extend(doubled.check_invariants())


def _compute_collar(args: argparse.Namespace, report: Report) -> None:
    X = load_space(args.space)
    collared = collar(X)
    before, after = euler_char(X), euler_char(collared)
    at_origin = origin_counts(collared)
    report.result.update({
        "euler_before": before,
        "euler_after": after,
        "origin_counts": _counts(at_origin),
        "cells": len(collared.cells),
        "space": payload_of(collared),
    })
    if before != after:
        report.add("EulerChanged", f"Collaring changed the Euler characteristic from {before} to {after}.",
                   witness=[before, after])
    if at_origin != stratum_counts(X):
        report.add("OriginCountsDiffer", "The t = 0 copy does not reproduce the strata of the input.")
    report.extend(collared.check_invariants())


def _compute_product(args: argparse.Namespace, report: Report) -> None:
    X, Y = load_space(args.space), load_space(args.other)
    P = product(X, Y)
    expected = euler_char(X) * euler_char(Y)
    report.result.update({
        "k": P.k,
        "cells": len(P.cells),
        "euler": euler_char(P),
        "space": payload_of(P),
    })
    if euler_char(P) != expected:
        report.add("EulerNotMultiplicative", f"Expected Euler characteristic {expected}.",
                   witness=[euler_char(P), expected])
    report.extend(P.check_invariants())


def _compute_euler(args: argparse.Namespace, report: Report) -> None:
    X = load_space(args.space)
    report.result.update({
        "k": X.k,
        "euler": euler_char(X),
        "stratum_counts": _counts(stratum_counts(X)),
    })
    report.extend(X.check_invariants())


def register(subparsers, common: argparse.ArgumentParser) -> None:
    """Add the stratified-space subcommands."""
    space_help = "strat_space document or bundled space name (point, interval, square)."
    for name, handler, help_text in (
        ("double", _compute_double, "Double a <k>-space along its walls."),
        ("collar", _compute_collar, "Attach cube collars to every stratum."),
        ("euler", _compute_euler, "Euler characteristic and cells per stratum."),
    ):
        p = subparsers.add_parser(name, parents=[common], help=help_text)
        p.add_argument("space", help=space_help)
        p.set_defaults(handler=handler)
    p = subparsers.add_parser("product", parents=[common], help="Product of two stratified spaces.")
    p.add_argument("space", help=space_help)
    p.add_argument("other", help=space_help)
    p.set_defaults(handler=_compute_product)
