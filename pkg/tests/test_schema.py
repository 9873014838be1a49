"""Tests for schema.py module."""

import pytest
from jsonschema import Draft202012Validator

from had_shock_lab.schema import (
    CONFIG_SCHEMA,
    MANIFEST_SCHEMA,
    SUMMARY_SCHEMA,
    validate_document,
)
from had_shock_lab.utils import ConfigError, DataError


@pytest.mark.parametrize("schema", [CONFIG_SCHEMA, SUMMARY_SCHEMA, MANIFEST_SCHEMA])
def test_schemas_are_valid(schema: dict[str, object]) -> None:
    """Every schema is itself a valid 2020-12 schema."""
    Draft202012Validator.check_schema(schema)


def test_validate_document_config() -> None:
    """A minimal config passes; wrong types fail with the offending key."""
    validate_document({"name": "ulam", "ulam_points": 100}, CONFIG_SCHEMA)
    with pytest.raises(DataError, match="ulam_points"):
        validate_document({"name": "ulam", "ulam_points": "many"}, CONFIG_SCHEMA)


def test_validate_document_error_class() -> None:
    """The caller chooses the exception type."""
    with pytest.raises(ConfigError, match="<root>"):
        validate_document({}, CONFIG_SCHEMA, error=ConfigError)


def test_summary_schema() -> None:
    """Summaries need every section and known verdict strings."""
    summary = {
        "experiment": "ulam",
        "params": {},
        "estimates": {},
        "tests": [{"test": "demo", "parameters": {}, "statistic": None, "p_value": None, "verdict": "skipped"}],
        "paper_targets": {},
        "verdicts": [{"quantity": "ratio", "estimate": 1.9, "low": 1.8, "high": 2.0, "passed": True}],
        "passed": True,
    }
    validate_document(summary, SUMMARY_SCHEMA)
    summary["tests"][0]["verdict"] = "maybe"  # type: ignore[index]
    with pytest.raises(DataError, match="tests/0/verdict"):
        validate_document(summary, SUMMARY_SCHEMA)


def test_summary_schema_reference_flags() -> None:
    """Verdicts and tests may carry a boolean reference flag."""
    summary = {
        "experiment": "flux_moments",
        "params": {},
        "estimates": {},
        "tests": [
            {"test": "demo", "parameters": {}, "statistic": 0.2, "p_value": 0.001, "verdict": "fail", "reference": True}
        ],
        "paper_targets": {},
        "verdicts": [
            {"quantity": "var_xi", "estimate": 11.2, "low": 12.0, "high": 13.0, "passed": False, "reference": True}
        ],
        "passed": True,
    }
    validate_document(summary, SUMMARY_SCHEMA)
    summary["verdicts"][0]["reference"] = "yes"  # type: ignore[index]
    with pytest.raises(DataError, match="verdicts/0/reference"):
        validate_document(summary, SUMMARY_SCHEMA)


def test_manifest_schema_hash_pattern() -> None:
    """The raw CSV digest is 64 lowercase hex characters."""
    manifest = {
        "config": {},
        "version": "0.1.0",
        "replicas": 1,
        "seed_labels": ["ulam:0:replica"],
        "corrupted_replicas": 0,
        "wall_clock_seconds": 0.5,
        "raw_csv": "ulam_raw.csv",
        "raw_csv_sha256": "a" * 64,
        "rows": [],
        "passed": True,
    }
    validate_document(manifest, MANIFEST_SCHEMA)
    with pytest.raises(DataError, match="raw_csv_sha256"):
        validate_document({**manifest, "raw_csv_sha256": "xyz"}, MANIFEST_SCHEMA)
