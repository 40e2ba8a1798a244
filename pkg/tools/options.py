"""Flags shared by every NovCalc command and small flag parsers."""

import argparse
from fractions import Fraction
from typing import Optional

from core.data_loader import DEFAULTS
from core.novikov import to_fraction


def common_parser() -> argparse.ArgumentParser:
    """Parent parser carrying the flags every subcommand accepts."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("--format", choices=("json", "text"), default="json",
                        help="Report format on standard output.")
    parser.add_argument("--verbose", action="store_true",
                        help="Log algorithm progress to standard error.")
    parser.add_argument("--seed", type=int, default=DEFAULTS["seed"],
                        help="Seed for randomized steps.")
    parser.add_argument("--truncation", default=DEFAULTS["truncation"],
                        help="Work modulo T^(p/q); 'exact' for no truncation.")
    parser.add_argument("--tol", type=float, default=None,
                        help="Numerical tolerance for zero finding.")
    return parser


def truncation_of(args: argparse.Namespace) -> Optional[Fraction]:
    """The --truncation flag as a Fraction, or None for exact."""
    raw = str(args.truncation).strip()
    if raw.lower() in ("exact", "none"):
        return None
    value = to_fraction(raw)
    if value <= 0:
        raise ValueError(
            f"Truncation must be positive, got {raw}. Use 'exact' to switch truncation off."
        )
    return value


def id_list(text: str) -> list[str]:
    """Split 'a,b,c' into ids."""
    return [part.strip() for part in text.split(",") if part.strip()]


def assignments(values: list[str]) -> dict[str, int]:
    """Parse repeated 'id=N' flags."""
    out = {}
    for item in values:
        if "=" not in item:
            raise ValueError(f"Expected id=N, got '{item}'.")
        key, value = item.split("=", 1)
        try:
            out[key.strip()] = int(value)
        except ValueError:
            raise ValueError(f"Part number in '{item}' is not an integer.")
    return out
