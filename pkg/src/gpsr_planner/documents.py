"""Loading and dumping for the versioned YAML document family.

World descriptions, template banks, prompt banks, interaction scripts and
command suites all share the same envelope: a YAML mapping with a
``schema: 1`` version field.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

import yaml

from .errors import SchemaError

SCHEMA_VERSION = 1


def parse_document(text: str, *, kind: str = "document") -> dict[str, Any]:
    """Parse YAML text into a mapping and check the schema version."""
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise SchemaError(f"{kind} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise SchemaError(f"{kind} must be a mapping, got {type(data).__name__}")
    version = data.get("schema")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{kind} requires 'schema: {SCHEMA_VERSION}', got {version!r}")
    return data


def load_document(path: str | Path, *, kind: str = "document") -> dict[str, Any]:
    return parse_document(Path(path).read_text(encoding="utf-8"), kind=kind)


def dump_document(data: dict[str, Any]) -> str:
    return yaml.safe_dump(data, sort_keys=False, allow_unicode=True)
