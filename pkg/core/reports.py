"""Command reports for NovCalc.

Every command produces one Report: the command name, a status, a list of
structured findings and the wall-clock time it took. JSON output is
canonical (sorted keys) so that two runs with the same inputs and flags
differ only in ``timing``.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Literal

import numpy as np
import sympy as sp

from core.novikov import NovikovElement, format_element
from core.validation import ValidationResult

Status = Literal["ok", "violation", "error"]

EXIT_CODES = {"ok": 0, "violation": 1, "error": 2}


def to_plain(value: Any) -> Any:
    """Convert a finding value into JSON-ready data."""
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, float):
        return value
    if isinstance(value, Fraction):
        return {"num": value.numerator, "den": value.denominator}
    if isinstance(value, NovikovElement):
        return format_element(value)
    if isinstance(value, ValidationResult):
        return to_plain(value.to_dict())
    if isinstance(value, dict):
        return {_key(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (frozenset, set)):
        return sorted(to_plain(v) for v in value)
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, sp.Basic):
        return str(value)
    return str(value)


def _key(key: Any) -> str:
    if isinstance(key, str):
        return key
    if isinstance(key, (tuple, frozenset, set)):
        items = sorted(key) if isinstance(key, (frozenset, set)) else key
        return ",".join(str(k) for k in items)
    return str(key)


@dataclass
class Report:
    """Outcome of one command.

    ``status`` is "ok" when nothing was violated, "violation" when a
    check failed or a domain error was raised, "error" for unreadable
    input or bad flags.
    """
    command: str
    status: Status = "ok"
    findings: list = field(default_factory=list)
    result: dict = field(default_factory=dict)
    timing: float = 0.0

    def add(self, code: str, message: str, witness: Any = None, severity: str = "error") -> None:
        record = {"code": code, "message": message, "severity": severity}
        if witness is not None:
            record["witness"] = witness
        self.findings.append(record)
        if severity == "error" and self.status == "ok":
            self.status = "violation"

    def extend(self, results: list[ValidationResult]) -> None:
        """Record every failing ValidationResult."""
        for r in results:
            if not r.valid:
                self.add(r.code, r.message or r.code, r.witness, r.severity)

    def fail(self, exc: Exception, status: Status = "violation") -> None:
        self.add(type(exc).__name__, str(exc), getattr(exc, "witness", None))
        self.status = status

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def to_dict(self, timing: bool = True) -> dict:
        body = {
            "command": self.command,
            "status": self.status,
            "findings": to_plain(self.findings),
            "result": to_plain(self.result),
        }
        if timing:
            body["timing"] = round(self.timing, 6)
        return body

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True, indent=2)

    def to_text(self) -> str:
        lines = [f"{self.command}: {self.status}"]
        for key, value in sorted(to_plain(self.result).items()):
            lines.append(f"  {key}: {json.dumps(value, sort_keys=True)}")
        for f in to_plain(self.findings):
            label = "Error" if f["severity"] == "error" else f["severity"].capitalize()
            line = f"  {label} [{f['code']}]: {f['message']}"
            if "witness" in f:
                line += f" (witness: {json.dumps(f['witness'], sort_keys=True)})"
            lines.append(line)
        lines.append(f"  time: {self.timing:.3f}s")
        return "\n".join(lines)

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_text()
