"""Versioned run reports: JSON, CSV and plain text renderings."""

from __future__ import annotations

import csv
import io
import json
import math
from importlib import resources

__all__ = [
    "SCHEMA_VERSION",
    "make_report",
    "load_schema",
    "validate_report",
    "to_json",
    "to_csv",
    "to_text",
    "render",
]

SCHEMA_VERSION = "1.0"


def _clean(value, path, warnings):
    """Replace non-finite floats by ``None`` and note where that happened."""
    if isinstance(value, dict):
        return {k: _clean(v, f"{path}.{k}" if path else k, warnings) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v, f"{path}.{i}", warnings) for i, v in enumerate(value)]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        warnings.append(f"{path} is not finite ({value}); reported as null")
        return None
    return value


def make_report(command, config, results, warnings=()):
    warnings = list(warnings)
    clean_results = _clean(list(results), "results", warnings)
    clean_config = _clean(dict(config), "config", warnings)
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": clean_config,
        "results": clean_results,
        "warnings": warnings,
    }


def load_schema():
    text = resources.files("tubebound").joinpath("report_schema.json").read_text()
    return json.loads(text)


def validate_report(report):
    """Raise ``jsonschema.ValidationError`` if the report does not match the schema."""
    import jsonschema

    jsonschema.validate(report, load_schema())


def to_json(report):
    return json.dumps(report, indent=2, allow_nan=False) + "\n"


def _flatten(value, prefix, out):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(v, f"{prefix}.{k}" if prefix else k, out)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _flatten(v, f"{prefix}.{i}", out)
    else:
        out[prefix] = value


def to_csv(report):
    """One row per result record; columns in first-seen order."""
    rows = []
    columns = {}
    for rec in report["results"]:
        flat = {}
        _flatten(rec, "", flat)
        rows.append(flat)
        for k in flat:
            columns.setdefault(k, None)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(columns))
    for flat in rows:
        writer.writerow(["" if flat.get(k) is None else _fmt(flat.get(k)) for k in columns])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_text(report):
    lines = [f"{report['command']} (schema {report['schema_version']})"]
    for i, rec in enumerate(report["results"]):
        lines.append(f"[{i}]")
        flat = {}
        _flatten(rec, "", flat)
        width = max((len(k) for k in flat), default=0)
        for k, v in flat.items():
            lines.append(f"  {k.ljust(width)}  {'null' if v is None else _fmt(v)}")
    for w in report["warnings"]:
        lines.append(f"warning: {w}")
    return "\n".join(lines) + "\n"


def render(report, fmt):
    if fmt == "json":
        return to_json(report)
    if fmt == "csv":
        return to_csv(report)
    if fmt == "text":
        return to_text(report)
    raise ValueError(f"unknown format {fmt!r}")
