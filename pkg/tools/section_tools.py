"""Section commands: extend, transversal, count, boundary."""

import argparse

from core.documents import payload_of, read_document
from core.perturb import (
    boundary_consistency,
    check_strong_transversality,
    count_signed_zeros,
    extend_from_boundary,
    restrict_to_face,
)
from core.reports import Report
from tools.options import id_list


def _section(args: argparse.Namespace):
    return read_document(args.document, ("section",)).build()


def _compute_extend(args: argparse.Namespace, report: Report) -> None:
    bd = read_document(args.document, ("boundary_data",)).build()
    s = extend_from_boundary(bd)
    report.result["section"] = payload_of(s)
    for T, piece in sorted(bd.faces.items(), key=lambda item: (len(item[0]), sorted(item[0]))):
        if not restrict_to_face(s.map, bd.corner_dim, T).equals(piece):
            report.add("FaceNotReproduced", f"The extension differs from the data on face {sorted(T)}.",
                       witness=sorted(T))


def _compute_transversal(args: argparse.Namespace, report: Report) -> None:
    result = check_strong_transversality(_section(args), tol=args.tol)
    report.result.update(result.to_dict())
    for r in result.strata:
        if not r.transverse:
            report.add("NotTransverse", f"The section is not transverse on stratum {list(r.stratum)}.",
                       witness=list(r.stratum))


def _compute_count(args: argparse.Namespace, report: Report) -> None:
    s = _section(args)
    stratum = None if args.stratum is None else frozenset(int(j) for j in id_list(args.stratum))
    total = count_signed_zeros(s, stratum=stratum, tol=args.tol)
    shown = sorted(stratum) if stratum is not None else list(range(1, s.corner_dim + 1))
    report.result.update({"stratum": shown, "count": total})


def _compute_boundary(args: argparse.Namespace, report: Report) -> None:
    result = boundary_consistency(_section(args), tol=args.tol)
    report.result.update(result.to_dict())
    for j, wall in sorted(result.walls.items()):
        if wall["endpoint_sum"] != wall["expected"]:
            report.add(
                "SignMismatch",
                f"Curve endpoints on wall {j} sum to {wall['endpoint_sum']} but the wall count "
                f"gives {wall['expected']}.",
                witness=j,
            )
    if result.unmatched:
        report.add("UnmatchedEndpoints", "Some traced curves ended away from the walls.",
                   witness=[list(u) for u in result.unmatched])


def register(subparsers, common: argparse.ArgumentParser) -> None:
    """Add the section subcommands."""
    p = subparsers.add_parser("extend", parents=[common], help="Extend boundary data to the whole box.")
    p.add_argument("document")
    p.set_defaults(handler=_compute_extend)

    p = subparsers.add_parser("transversal", parents=[common], help="Check strong transversality stratum by stratum.")
    p.add_argument("document")
    p.set_defaults(handler=_compute_transversal)

    p = subparsers.add_parser("count", parents=[common], help="Signed count of zeros on one stratum.")
    p.add_argument("document")
    p.add_argument("--stratum", default=None, help="Comma-separated corner coordinates; the top stratum by default.")
    p.set_defaults(handler=_compute_count)

    p = subparsers.add_parser("boundary", parents=[common], help="Compare curve endpoint signs with wall counts.")
    p.add_argument("document")
    p.set_defaults(handler=_compute_boundary)
