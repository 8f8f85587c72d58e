"""Strict schema-checked parsing of model output, with bounded repair.

The accept pipeline is: direct parse, then code-fence stripping, then the
first parseable balanced brace/bracket region, then at most one corrective
re-prompt supplied by the caller. Anything accepted must validate strictly
against the task's schema descriptor; unknown fields are rejected.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Any, Callable

from .errors import SchemaError

logger = logging.getLogger(__name__)

_FENCE_RE = re.compile(r"```[a-zA-Z]*\s*\n?(.*?)```", re.DOTALL)


@dataclass(frozen=True)
class FieldSpec:
    """Expected kind of one value. ``item`` describes list elements and
    ``fields`` describes object members (strict: no unknown members)."""

    kind: str  # string | integer | boolean | list | object
    required: bool = True
    nonempty: bool = False
    item: "FieldSpec | None" = None
    fields: "dict[str, FieldSpec] | None" = None


@dataclass(frozen=True)
class SchemaDescriptor:
    name: str
    root: FieldSpec

    def describe(self) -> str:
        return f"a JSON {self.root.kind} shaped as {_describe(self.root)}"


def _describe(spec: FieldSpec) -> str:
    if spec.kind == "object":
        inner = ", ".join(f'"{k}": {_describe(v)}' for k, v in (spec.fields or {}).items())
        return "{" + inner + "}"
    if spec.kind == "list":
        return f"[{_describe(spec.item)} ...]" if spec.item else "[...]"
    return spec.kind


def validate_value(value: Any, spec: FieldSpec, path: str = "$") -> list[tuple[str, str]]:
    errors: list[tuple[str, str]] = []
    if spec.kind == "string":
        if not isinstance(value, str):
            errors.append((path, f"expected string, got {type(value).__name__}"))
        elif spec.nonempty and not value.strip():
            errors.append((path, "string must be nonempty"))
    elif spec.kind == "integer":
        if not isinstance(value, int) or isinstance(value, bool):
            errors.append((path, f"expected integer, got {type(value).__name__}"))
    elif spec.kind == "boolean":
        if not isinstance(value, bool):
            errors.append((path, f"expected boolean, got {type(value).__name__}"))
    elif spec.kind == "list":
        if not isinstance(value, list):
            errors.append((path, f"expected list, got {type(value).__name__}"))
        else:
            if spec.nonempty and not value:
                errors.append((path, "list must be nonempty"))
            if spec.item is not None:
                for i, element in enumerate(value):
                    errors.extend(validate_value(element, spec.item, f"{path}[{i}]"))
    elif spec.kind == "object":
        if not isinstance(value, dict):
            errors.append((path, f"expected object, got {type(value).__name__}"))
        else:
            fields = spec.fields or {}
            for name, member in fields.items():
                if name not in value:
                    if member.required:
                        errors.append((f"{path}.{name}", "required field is missing"))
                    continue
                errors.extend(validate_value(value[name], member, f"{path}.{name}"))
            for name in value:
                if name not in fields:
                    errors.append((f"{path}.{name}", "unknown field"))
    else:
        errors.append((path, f"schema bug: unknown kind {spec.kind!r}"))
    return errors


@dataclass(frozen=True)
class ParseResult:
    """Accepted value, plus which repairs (if any) were needed to get it."""

    value: Any
    repairs: tuple[str, ...] = ()

    @property
    def repaired(self) -> bool:
        return bool(self.repairs)


def _balanced_regions(text: str) -> list[str]:
    """Balanced {...} / [...] regions in order of opening position,
    quote-aware so braces inside JSON strings do not end a region."""
    regions = []
    openers = {"{": "}", "[": "]"}
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in openers:
            depth = 0
            in_string = False
            escaped = False
            for j in range(i, len(text)):
                c = text[j]
                if in_string:
                    if escaped:
                        escaped = False
                    elif c == "\\":
                        escaped = True
                    elif c == '"':
                        in_string = False
                    continue
                if c == '"':
                    in_string = True
                elif c in "{[":
                    depth += 1
                elif c in "}]":
                    depth -= 1
                    if depth == 0:
                        regions.append(text[i : j + 1])
                        break
        i += 1
    return regions


def _candidates(raw: str) -> list[tuple[str, str]]:
    """(repair label, candidate text) in order of preference."""
    out: list[tuple[str, str]] = [("", raw.strip().lstrip("﻿"))]
    for block in _FENCE_RE.findall(raw):
        out.append(("code_fence_stripped", block.strip()))
    for region in _balanced_regions(raw):
        out.append(("balanced_region_extracted", region))
    seen: set[str] = set()
    unique = []
    for label, text in out:
        if text and text not in seen:
            seen.add(text)
            unique.append((label, text))
    return unique


def _attempt(raw: str, schema: SchemaDescriptor) -> tuple[ParseResult | None, list[tuple[str, str]]]:
    first_errors: list[tuple[str, str]] = []
    for label, candidate in _candidates(raw):
        try:
            value = json.loads(candidate)
        except (json.JSONDecodeError, ValueError):
            continue
        errors = validate_value(value, schema.root)
        if not errors:
            repairs = (label,) if label else ()
            return ParseResult(value=value, repairs=repairs), []
        if not first_errors:  # earliest candidate is the likeliest payload
            first_errors = errors
    if not first_errors:
        first_errors = [("$", "no parseable JSON found")]
    return None, first_errors


def parse_structured(
    raw: str,
    schema: SchemaDescriptor,
    reprompt: Callable[[str], str] | None = None,
) -> ParseResult:
    """Parse ``raw`` against ``schema``. ``reprompt`` is called at most once
    with a correction message and must return fresh raw text; backend failures
    inside it count as repair exhaustion. Raises SchemaError with the raw text
    preserved for audit."""
    result, errors = _attempt(raw, schema)
    if result is not None:
        return result
    if reprompt is not None:
        detail = "; ".join(f"{path}: {message}" for path, message in errors[:5])
        correction = (
            f"The previous reply could not be used ({detail}). "
            f"Reply with only {schema.describe()} and nothing else."
        )
        try:
            retry_raw = reprompt(correction)
        except Exception as exc:  # gateway errors exhaust the repair budget
            logger.warning("repair re-prompt failed for %s: %s", schema.name, exc)
            raise SchemaError(
                f"{schema.name}: unparseable output and repair re-prompt failed", raw=raw
            ) from exc
        result, errors = _attempt(retry_raw, schema)
        if result is not None:
            return ParseResult(value=result.value, repairs=("reprompt",) + result.repairs)
        raw = retry_raw
    detail = "; ".join(f"{path}: {message}" for path, message in errors[:5])
    raise SchemaError(f"{schema.name}: output rejected ({detail})", raw=raw)
