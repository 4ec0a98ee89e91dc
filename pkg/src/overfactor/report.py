"""Versioned JSON report writing and schema validation."""

from __future__ import annotations

import json
from importlib import resources

import jsonschema

__all__ = ["load_schema", "validate_report", "write_report"]

_schema_cache = None


def load_schema() -> dict:
    global _schema_cache
    if _schema_cache is None:
        text = resources.files("overfactor").joinpath("report_schema.json").read_text()
        _schema_cache = json.loads(text)
    return _schema_cache


def validate_report(report: dict) -> None:
    """Raise jsonschema.ValidationError if the report violates the schema."""
    jsonschema.validate(report, load_schema())


def write_report(report: dict, path) -> None:
    validate_report(report)
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=False)
        fh.write("\n")
