"""Config file loading and JSON-schema documents for had-shock-lab."""

import json
from pathlib import Path
from typing import Any

import yaml
from jsonschema import Draft202012Validator

from had_shock_lab.utils import ConfigError, DataError, LabError

SCHEMA_DRAFT = "https://json-schema.org/draft/2020-12/schema"

EXPERIMENT_NAMES = (
    "mean_var_z",
    "flux_moments",
    "burke_test",
    "lpp_check",
    "ulam",
    "identity_a47",
    "clt_dependence",
)

_positive = {"type": "number", "exclusiveMinimum": 0}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": SCHEMA_DRAFT,
    "title": "had-shock-lab experiment configuration",
    "type": "object",
    "properties": {
        "name": {"type": "string", "enum": list(EXPERIMENT_NAMES)},
        "lambda": _positive,
        "rho": _positive,
        "gamma": _positive,
        "t": _positive,
        "x": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "replicas": {"type": "integer", "minimum": 1},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "out_dir": {"type": "string"},
        "horizons": {"type": "array", "items": _positive, "minItems": 2},
        "ulam_points": {"type": "integer", "minimum": 1},
        "variant": {"type": "string", "enum": ["origin", "drop_first_source", "drop_first_sink"]},
        "workers": {"type": "integer", "minimum": 1},
    },
    "required": ["name"],
    "additionalProperties": False,
}

_verdict = {
    "type": "object",
    "properties": {
        "quantity": {"type": "string"},
        "estimate": {"type": ["number", "null"]},
        "target": {"type": ["number", "null"]},
        "low": {"type": ["number", "null"]},
        "high": {"type": ["number", "null"]},
        "passed": {"type": "boolean"},
        "reference": {"type": "boolean"},
    },
    "required": ["quantity", "estimate", "low", "high", "passed"],
}

_test_row = {
    "type": "object",
    "properties": {
        "test": {"type": "string"},
        "parameters": {"type": "object"},
        "statistic": {"type": ["number", "null"]},
        "p_value": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
        "n": {"type": "integer"},
        "verdict": {"type": "string", "enum": ["pass", "fail", "skipped"]},
        "reference": {"type": "boolean"},
    },
    "required": ["test", "parameters", "statistic", "p_value", "verdict"],
}

SUMMARY_SCHEMA: dict[str, Any] = {
    "$schema": SCHEMA_DRAFT,
    "title": "had-shock-lab experiment summary",
    "type": "object",
    "properties": {
        "experiment": {"type": "string", "enum": list(EXPERIMENT_NAMES)},
        "params": {"type": "object"},
        "estimates": {"type": "object"},
        "tests": {"type": "array", "items": _test_row},
        "paper_targets": {"type": "object"},
        "verdicts": {"type": "array", "items": _verdict},
        "passed": {"type": "boolean"},
    },
    "required": ["experiment", "params", "estimates", "tests", "paper_targets", "verdicts", "passed"],
}

MANIFEST_SCHEMA: dict[str, Any] = {
    "$schema": SCHEMA_DRAFT,
    "title": "had-shock-lab run manifest",
    "type": "object",
    "properties": {
        "config": {"type": "object"},
        "version": {"type": "string"},
        "replicas": {"type": "integer", "minimum": 1},
        "seed_labels": {"type": "array", "items": {"type": "string"}},
        "corrupted_replicas": {"type": "integer", "minimum": 0},
        "wall_clock_seconds": {"type": "number", "minimum": 0},
        "raw_csv": {"type": "string"},
        "raw_csv_sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "rows": {"type": "array"},
        "passed": {"type": "boolean"},
    },
    "required": [
        "config",
        "version",
        "replicas",
        "seed_labels",
        "corrupted_replicas",
        "wall_clock_seconds",
        "raw_csv",
        "raw_csv_sha256",
        "rows",
        "passed",
    ],
}


def load_config_file(file_path: Path) -> dict[str, Any]:
    """Load a configuration mapping from a JSON or YAML file."""
    try:
        with file_path.open(encoding="utf-8") as f:
            if file_path.suffix.lower() in (".yml", ".yaml"):
                result = yaml.safe_load(f)
            else:
                result = json.load(f)
    except (json.JSONDecodeError, yaml.YAMLError) as e:
        raise ConfigError(f"Invalid file format in {file_path}: {e}") from e

    if not isinstance(result, dict):
        raise ConfigError(f"{file_path}: configuration must be a mapping")
    return result


def validate_document(document: Any, schema: dict[str, Any], error: type[LabError] = DataError) -> None:
    """
    Validate a document against one of the schemas above.

    Args:
        document: Parsed JSON-compatible document
        schema: JSON schema
        error: Exception class raised on failure

    """
    validator = Draft202012Validator(schema)
    problems = sorted(validator.iter_errors(document), key=lambda e: list(e.absolute_path))
    if problems:
        messages = "; ".join(
            f"{'/'.join(str(p) for p in problem.absolute_path) or '<root>'}: {problem.message}" for problem in problems
        )
        raise error(f"{schema.get('title', 'document')} is invalid: {messages}")
