"""Canonical structured-text documents shared by bodies, genomes, specs and checkpoints.

Every document is a JSON object with a ``format_version`` and a ``type`` field.
Serialization sorts keys and uses a fixed indent, so byte equality of two
documents implies structural equality of what they describe.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any

FORMAT_VERSION = 1


class DocumentError(ValueError):
    """Malformed document text (carries the line and column of the fault)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + where)
        self.line = line
        self.column = column


class SchemaError(ValueError):
    """Well-formed document that does not match the expected schema."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


def dumps(payload: dict[str, Any], doc_type: str) -> str:
    doc = {"format_version": FORMAT_VERSION, "type": doc_type, **payload}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def loads(text: str, doc_type: str) -> dict[str, Any]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(doc, dict):
        raise SchemaError("document root must be an object")
    version = doc.get("format_version")
    if version is None:
        raise SchemaError("missing field 'format_version'", "format_version")
    if version != FORMAT_VERSION:
        raise SchemaError(f"unsupported format_version {version!r}", "format_version")
    found = doc.get("type")
    if found != doc_type:
        raise SchemaError(f"expected document type {doc_type!r}, got {found!r}", "type")
    return doc


def require(doc: dict[str, Any], fields: set[str], context: str = "document") -> None:
    """Raise SchemaError naming the first missing or unexpected field."""
    missing = sorted(fields - doc.keys())
    if missing:
        raise SchemaError(f"{context}: missing field {missing[0]!r}", missing[0])
    extra = sorted(doc.keys() - fields)
    if extra:
        raise SchemaError(f"{context}: unexpected field {extra[0]!r}", extra[0])


def write(path: str | Path, text: str) -> None:
    """Atomic replace, so an interrupted run never leaves a half-written file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def read(path: str | Path) -> str:
    return Path(path).read_text(encoding="utf-8")
