"""NovCalc: exact Novikov-ring computations for flow categories.

Main entry point: assembles every command family into one CLI and
turns each run into a report on standard output. Diagnostics go to
standard error.

Exit codes: 0 when nothing was violated, 1 when a check failed or a
domain error was raised, 2 for usage errors and unreadable documents.
"""

import argparse
import logging
import sys
import time
from typing import Optional, Sequence

from core.errors import NovCalcError, ParseError, SchemaError
from core.reports import Report
from tools import algebra_tools, flow_tools, morse_tools, section_tools, strata_tools
from tools.options import common_parser

LOGGER = logging.getLogger(__name__)

LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"

COMMAND_FAMILIES = (flow_tools, algebra_tools, strata_tools, section_tools, morse_tools)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="novcalc",
        description="Exact Novikov-ring computations for flow categories, "
                    "stratified spaces, polynomial sections and discrete Morse theory.",
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    common = common_parser()
    for family in COMMAND_FAMILIES:
        family.register(subparsers, common)
    return parser


def _stderr_handler(verbose: bool) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)
    return handler


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one command and print its report.

    Returns:
        The exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else 2
    if getattr(args, "handler", None) is None:
        parser.print_usage(sys.stderr)
        return 2

    handler = _stderr_handler(args.verbose)
    report = Report(args.command)
    start = time.perf_counter()
    try:
        args.handler(args, report)
    except (ParseError, SchemaError) as exc:
        report.fail(exc, "error")
    except NovCalcError as exc:
        report.fail(exc)
    except (ValueError, OSError) as exc:
        report.fail(exc, "error")
    finally:
        report.timing = time.perf_counter() - start
        logging.getLogger().removeHandler(handler)
    LOGGER.debug("%s finished with status %s", args.command, report.status)
    print(report.render(args.format))
    return report.exit_code


if __name__ == "__main__":
    raise SystemExit(run())
