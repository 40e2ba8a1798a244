"""Novikov-ring commands: snf and minrank."""

import argparse

from core.documents import payload_of, read_document
from core.flowcat import assemble_complex
from core.novikov import format_element, min_rank, nov_diagonalize, nov_homology
from core.reports import Report
from core.validation import validate_range
from tools.options import truncation_of


def _compute_snf(args: argparse.Namespace, report: Report) -> None:
    M = read_document(args.document, ("novikov_matrix",)).build()
    diag = nov_diagonalize(M)
    report.result.update({
        "rank": diag.rank,
        "invariant_factors": [format_element(f) for f in diag.invariant_factors],
        "non_integral": list(diag.non_integral),
        "truncation": diag.truncation,
        "det_u": format_element(diag.det_u),
        "det_v": format_element(diag.det_v),
        "D": payload_of(diag.D),
        "U": payload_of(diag.U),
        "V": payload_of(diag.V),
    })
    for i in diag.non_integral:
        report.add(
            "NonIntegralFactor",
            f"Invariant factor {i} is not associate to an integer.",
            witness=i, severity="warning",
        )


def _compute_minrank(args: argparse.Namespace, report: Report) -> None:
    doc = read_document(args.document, ("complex", "flow_category"))
    obj = doc.build()
    C = assemble_complex(obj, truncation_of(args)) if doc.kind == "flow_category" else obj
    H = nov_homology(C)
    period = C.period if args.period is None else args.period
    check = validate_range(period, 0, 64, "Grading period")
    if not check.valid:
        raise ValueError(check.message)
    minimal = min_rank(H, period)
    report.result.update({
        "cohomology": H.to_dict(),
        "period": period,
        "min_rank": minimal.bound,
        "rank_bound": minimal.rank_bound,
        "per_degree": {str(k): v for k, v in minimal.per_degree.items()},
        "generators": len(C.generators),
        "verified": minimal.verified,
    })
    if not minimal.verified:
        report.add("RealizationFailed", "The realizing complex does not reproduce the cohomology.")


def register(subparsers, common: argparse.ArgumentParser) -> None:
    """Add the Novikov-ring subcommands."""
    snf = subparsers.add_parser("snf", parents=[common],
                                help="Diagonalize a Novikov matrix (Smith form over the ring).")
    snf.add_argument("document")
    snf.set_defaults(handler=_compute_snf)

    mr = subparsers.add_parser("minrank", parents=[common],
                               help="Minimal rank of a free complex with the same cohomology.")
    mr.add_argument("document")
    mr.add_argument("--period", type=int, default=None,
                    help="Grading period; defaults to the period of the complex.")
    mr.set_defaults(handler=_compute_minrank)
