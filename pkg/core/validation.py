"""Findings and input checks with explanatory messages for NovCalc.

Report-style checks return lists of ValidationResult instead of raising,
so a single run can surface every problem with an input at once.
"""

from dataclasses import dataclass
from typing import Any, Optional


@dataclass
class ValidationResult:
    """Result of a validation check."""
    valid: bool
    code: str
    message: Optional[str] = None
    severity: str = "error"  # "error", "warning", "info"
    witness: Optional[Any] = None

    def to_dict(self) -> dict:
        record = {
            "valid": self.valid,
            "code": self.code,
            "severity": self.severity,
        }
        if self.message is not None:
            record["message"] = self.message
        if self.witness is not None:
            record["witness"] = self.witness
        return record


def errors_in(results: list[ValidationResult]) -> list[ValidationResult]:
    """Return only the failing error-severity results."""
    return [r for r in results if not r.valid and r.severity == "error"]


def validate_range(
    value: float,
    min_val: float,
    max_val: float,
    field_name: str,
) -> ValidationResult:
    """Range check with an explanatory error message.

    Args:
        value: Value to validate.
        min_val: Minimum allowed value.
        max_val: Maximum allowed value.
        field_name: Human-readable field name for error messages.

    Returns:
        ValidationResult indicating whether the value is in range.
    """
    if value < min_val:
        return ValidationResult(
            valid=False,
            code="OutOfRange",
            message=(
                f"{field_name} ({value}) is below the minimum ({min_val}). "
                f"Please enter a value between {min_val} and {max_val}."
            ),
            severity="error",
        )
    if value > max_val:
        return ValidationResult(
            valid=False,
            code="OutOfRange",
            message=(
                f"{field_name} ({value}) exceeds the maximum ({max_val}). "
                f"Please enter a value between {min_val} and {max_val}. "
                "Larger inputs are outside the sizes where exhaustive "
                "subdivision terminates in reasonable time."
            ),
            severity="error",
        )
    return ValidationResult(valid=True, code="InRange")


def validate_section_size(
    corner_dim: int,
    free_dim: int,
    degree: int,
    group_order: int,
    caps: dict,
) -> list[ValidationResult]:
    """Check a section against the desk-scale caps.

    Args:
        corner_dim: Number of corner coordinates (ell).
        free_dim: Number of free coordinates.
        degree: Total polynomial degree of the section.
        group_order: Order of the symmetry group (1 when none).
        caps: Mapping with ``corner_dim``, ``total_dim``, ``degree`` and
              ``group_order`` limits.

    Returns:
        List of failing ValidationResult objects. Empty list means all valid.
    """
    checks = [
        validate_range(corner_dim, 0, caps["corner_dim"], "Corner dimension"),
        validate_range(corner_dim + free_dim, 0, caps["total_dim"], "Total dimension"),
        validate_range(degree, 0, caps["degree"], "Polynomial degree"),
        validate_range(group_order, 1, caps["group_order"], "Group order"),
    ]
    return [c for c in checks if not c.valid]
