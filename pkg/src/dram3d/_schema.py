"""Strict dict <-> dataclass helpers shared by the JSON loaders."""

from __future__ import annotations

import dataclasses
import math
from typing import Any, Mapping


class ValidationError(ValueError):
    """A config value violates the schema or a type invariant.

    ``field`` is the dotted path of the offending entry.
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def check_keys(cls, data: Any, where: str) -> None:
    """Reject non-objects, unknown keys and missing required keys."""
    if not isinstance(data, Mapping):
        raise ValidationError(where, f"expected an object, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ValidationError(f"{where}.{unknown[0]}" if where else unknown[0], "unknown key")
    for name, f in fields.items():
        required = f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
        if required and name not in data:
            raise ValidationError(f"{where}.{name}" if where else name, "missing required key")


def number(data: Mapping, key: str, where: str, default: Any = dataclasses.MISSING,
           optional: bool = False) -> float | None:
    path = f"{where}.{key}" if where else key
    if key not in data:
        if default is dataclasses.MISSING:
            raise ValidationError(path, "missing required key")
        return default
    value = data[key]
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ValidationError(path, "must be finite")
    return float(value)


def integer(data: Mapping, key: str, where: str, default: Any = dataclasses.MISSING,
            optional: bool = False) -> int | None:
    path = f"{where}.{key}" if where else key
    if key not in data:
        if default is dataclasses.MISSING:
            raise ValidationError(path, "missing required key")
        return default
    value = data[key]
    if value is None and optional:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(path, f"expected an integer, got {value!r}")
    return value


def require(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise ValidationError(field, message)
