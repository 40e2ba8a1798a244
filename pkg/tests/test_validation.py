"""Tests for core/validation.py: findings and range checks."""

from core.data_loader import DEFAULTS
from core.validation import ValidationResult, errors_in, validate_range, validate_section_size


class TestValidateRange:
    """Range checks explain the allowed interval."""

    def test_value_in_range(self):
        result = validate_range(50, 0, 100, "Test field")
        assert result.valid is True
        assert result.code == "InRange"
        assert result.message is None

    def test_value_at_bounds(self):
        assert validate_range(0, 0, 100, "Test field").valid is True
        assert validate_range(100, 0, 100, "Test field").valid is True

    def test_value_below_minimum(self):
        result = validate_range(-1, 0, 100, "Test field")
        assert result.valid is False
        assert result.code == "OutOfRange"
        assert "below the minimum" in result.message
        assert "between 0 and 100" in result.message

    def test_value_above_maximum(self):
        result = validate_range(101, 0, 100, "Test field")
        assert result.valid is False
        assert "exceeds the maximum" in result.message

    def test_field_name_in_message(self):
        result = validate_range(-5, 0, 10, "Grading period")
        assert "Grading period (-5)" in result.message


class TestValidationResult:
    """Serialization and filtering of findings."""

    def test_to_dict_omits_empty_fields(self):
        assert ValidationResult(True, "InRange").to_dict() == {
            "valid": True, "code": "InRange", "severity": "error",
        }

    def test_to_dict_keeps_witness(self):
        record = ValidationResult(False, "UnknownObject", "No object 'z'.", witness="z").to_dict()
        assert record["witness"] == "z"
        assert record["message"] == "No object 'z'."

    def test_errors_in_skips_warnings_and_passes(self):
        results = [
            ValidationResult(True, "Fine"),
            ValidationResult(False, "FlagUnset", severity="warning"),
            ValidationResult(False, "MissingCount"),
        ]
        assert [r.code for r in errors_in(results)] == ["MissingCount"]


class TestValidateSectionSize:
    """Desk-scale caps on polynomial sections."""

    CAPS = {"corner_dim": 3, "total_dim": 4, "degree": 6, "group_order": 8}

    def test_small_section_passes(self):
        assert validate_section_size(2, 0, 2, 1, self.CAPS) == []

    def test_every_cap_reported(self):
        failures = validate_section_size(4, 1, 7, 9, self.CAPS)
        assert len(failures) == 4
        assert all(f.code == "OutOfRange" for f in failures)

    def test_group_order_must_be_positive(self):
        failures = validate_section_size(1, 0, 1, 0, self.CAPS)
        assert len(failures) == 1
        assert "Group order" in failures[0].message

    def test_defaults_have_caps(self):
        caps = DEFAULTS["caps"]
        assert validate_section_size(1, 1, 1, 1, caps) == []
