"""Flow-category commands: assemble, d2, cone, square, descend, bifurcate, arnold.

Each handler reads one document, runs the flowcat operation and records
the outcome on the report. Domain errors propagate to the caller, which
turns them into a violation with the error's witness.
"""

import argparse
import logging
import random
from fractions import Fraction

from core.documents import payload_of, read_document
from core.flowcat import (
    arnold_check,
    assemble_complex,
    bifurcation_birth,
    bifurcation_death,
    bifurcation_move_c,
    bifurcation_move_d,
    check_d_squared,
    cone_decompose,
    descend_to_lambda0,
    energies_of,
    square_decompose,
    validate_category,
)
from core.novikov import NovikovComplex, element, monomial, nov_homology
from core.reports import Report
from core.validation import errors_in
from tools.options import assignments, id_list, truncation_of

LOGGER = logging.getLogger(__name__)

FLOW = ("flow_category",)
COMPLEX_OR_FLOW = ("complex", "flow_category")


def _category(args: argparse.Namespace):
    return read_document(args.document, FLOW).build()


def _complex(args: argparse.Namespace) -> NovikovComplex:
    """A complex document as is, or a flow category assembled at --truncation."""
    doc = read_document(args.document, COMPLEX_OR_FLOW)
    obj = doc.build()
    if doc.kind == "flow_category":
        return assemble_complex(obj, truncation_of(args))
    return obj


def _compute_assemble(args: argparse.Namespace, report: Report) -> None:
    F = _category(args)
    findings = validate_category(F)
    report.extend(findings)
    if errors_in(findings):
        return
    C = assemble_complex(F, truncation_of(args))
    report.result["complex"] = payload_of(C)


def _compute_d2(args: argparse.Namespace, report: Report) -> None:
    ok, witnesses = check_d_squared(_category(args))
    report.result["d_squared_zero"] = ok
    for target, source in witnesses:
        report.add(
            "DSquaredNonzero",
            f"The composite d*d is nonzero from '{source}' to '{target}'.",
            witness=[target, source],
        )


def _compute_cone(args: argparse.Namespace, report: Report) -> None:
    if not args.c1:
        raise ValueError("The cone command needs --c1 with the objects of the first part.")
    F = _category(args)
    cone = cone_decompose(F, id_list(args.c1), truncation=truncation_of(args))
    report.result.update({
        "c1": list(cone.c1),
        "c2": list(cone.c2),
        "chain_map": cone.chain_map,
        "reassembles": cone.reassembles,
        "d1": payload_of(cone.d1),
        "d2": payload_of(cone.d2),
        "f": payload_of(cone.f),
    })
    if not cone.chain_map:
        report.add("NotAChainMap", "The off-diagonal block f does not commute with the differentials.")
    if not cone.reassembles:
        report.add("ConeMismatch", "The cone of f differs from the assembled complex.")


def _compute_square(args: argparse.Namespace, report: Report) -> None:
    if not args.part:
        raise ValueError("The square command needs --part id=N for every object (N in 1..4).")
    F = _category(args)
    sq = square_decompose(F, assignments(args.part), truncation=truncation_of(args))
    report.result.update({
        "parts": {str(p): list(ids) for p, ids in sorted(sq.parts.items())},
        "verified": sq.verified,
        "H": payload_of(sq.H),
        "solved_H": payload_of(sq.solved_H),
    })
    if not sq.verified:
        report.add(
            "HomotopyIdentityFails",
            "The C4 -> C1 block does not satisfy f*a + g*b = d*H + H*d.",
        )


def _compute_descend(args: argparse.Namespace, report: Report) -> None:
    F = _category(args)
    C = assemble_complex(F, truncation_of(args))
    report.result["complex"] = payload_of(descend_to_lambda0(C, energies_of(F)))


def _parse_move(C: NovikovComplex, spec: str) -> NovikovComplex:
    """Apply one --move: c:p,q[,sign[,weight]], d:p,u, birth:a,b,degree or death:a,b."""
    kind, _, rest = spec.partition(":")
    parts = id_list(rest)
    if kind == "c" and 2 <= len(parts) <= 4:
        sign = int(parts[2]) if len(parts) > 2 else 1
        weight = element(parts[3]) if len(parts) > 3 else None
        return bifurcation_move_c(C, parts[0], parts[1], sign, weight)
    if kind == "d" and len(parts) == 2:
        return bifurcation_move_d(C, parts[0], element(parts[1]))
    if kind == "birth" and len(parts) == 3:
        return bifurcation_birth(C, parts[0], parts[1], int(parts[2]))
    if kind == "death" and len(parts) == 2:
        return bifurcation_death(C, parts[0], parts[1])
    raise ValueError(
        f"Cannot read the move '{spec}'. Write c:p,q[,sign[,weight]], d:p,u, "
        "birth:a,b,degree or death:a,b."
    )


def random_moves(C: NovikovComplex, count: int, rng: random.Random) -> tuple[NovikovComplex, list[str]]:
    """Apply ``count`` random moves of type p -> p ± w·q and p -> (1 + u)·p."""
    applied = []
    for _ in range(count):
        pairs = [
            (p, q) for k in C.degrees() for p in C.generators_in(k) for q in C.generators_in(k) if p != q
        ]
        if pairs and (C.truncation is None or rng.random() < 0.5):
            p, q = rng.choice(pairs)
            sign = rng.choice((1, -1))
            weight = monomial(rng.choice((1, -1, 2)), Fraction(rng.randint(0, 4), 2))
            C = bifurcation_move_c(C, p, q, sign, weight)
            applied.append(f"c:{p},{q},{sign},{weight}")
        elif C.truncation is not None and C.generators:
            p = rng.choice([g for g, _ in C.generators])
            u = monomial(rng.choice((1, -1)), Fraction(rng.randint(1, 4), 2))
            C = bifurcation_move_d(C, p, u)
            applied.append(f"d:{p},{u}")
    return C, applied


def _compute_bifurcate(args: argparse.Namespace, report: Report) -> None:
    C = _complex(args)
    before = nov_homology(C)
    if args.move:
        moved = C
        for spec in args.move:
            moved = _parse_move(moved, spec)
        applied = list(args.move)
    else:
        moved, applied = random_moves(C, args.random, random.Random(args.seed))
    after = nov_homology(moved)
    same = before.same_as(after)
    report.result.update({
        "moves": applied,
        "before": before.to_dict(),
        "after": after.to_dict(),
        "invariant": same,
        "complex": payload_of(moved),
    })
    if not same:
        report.add("InvariantChanged", "The moves changed the cohomology of the complex.")


def _compute_arnold(args: argparse.Namespace, report: Report) -> None:
    result = arnold_check(_category(args), truncation_of(args))
    report.result.update(result.to_dict())
    if not result.holds:
        report.add(
            "BelowMinimalRank",
            f"{result.generators} generators are fewer than the minimal rank {result.minimal.bound}.",
            witness=[result.generators, result.minimal.bound],
        )


def register(subparsers, common: argparse.ArgumentParser) -> None:
    """Add the flow-category subcommands."""
    def add(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = subparsers.add_parser(name, parents=[common], help=help_text)
        p.add_argument("document", help="Document path, '-' for stdin, or a bundled example name.")
        p.set_defaults(handler=handler)
        return p

    add("assemble", _compute_assemble, "Validate a flow category and assemble its Novikov complex.")
    add("d2", _compute_d2, "Check d*d = 0 exactly and list every failing pair.")
    cone = add("cone", _compute_cone, "Write the complex as the cone of a map between two parts.")
    cone.add_argument("--c1", help="Comma-separated objects of the first part.")
    square = add("square", _compute_square, "Read a homotopy-commutative square off four parts.")
    square.add_argument("--part", action="append", default=[], help="id=N with N in 1..4.")
    add("descend", _compute_descend, "Rebase the assembled complex over Lambda_0.")
    bif = add("bifurcate", _compute_bifurcate, "Apply bifurcation moves and compare cohomology.")
    bif.add_argument("--move", action="append", default=[],
                     help="c:p,q[,sign[,weight]], d:p,u, birth:a,b,degree or death:a,b.")
    bif.add_argument("--random", type=int, default=10,
                     help="Number of seeded random moves when no --move is given.")
    add("arnold", _compute_arnold, "Compare the generator count with the minimal rank.")
