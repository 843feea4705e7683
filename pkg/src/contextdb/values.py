"""Typed atomic values and the unit value.

Node extents hold integers, floats, text, ISO dates (kept as strings and
compared lexicographically) or the unit value; product extents hold tuples
aligned to canonical factor order.
"""

from __future__ import annotations

import re

BASES = ("integer", "float", "text", "date", "unit")

_DATE_RE = re.compile(r"^\d{4}-\d{2}-\d{2}$")

TERMINAL_ATTR = "⊤"  # ⊤, reserved attribute backing the terminal node
UNIT_TOKEN = "⊤"


class Unit:
    """The single inhabitant of the terminal domain."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return UNIT_TOKEN

    def __reduce__(self):
        return (Unit, ())


UNIT = Unit()


def check_value(value, base: str) -> bool:
    """Typed membership of an atomic value in a base domain."""
    if base == "integer":
        return type(value) is int
    if base == "float":
        return type(value) in (int, float)
    if base == "text":
        return isinstance(value, str)
    if base == "date":
        return isinstance(value, str) and bool(_DATE_RE.match(value))
    if base == "unit":
        return value is UNIT
    raise ValueError(f"unknown base domain {base!r}")


def value_to_json(value):
    if value is UNIT:
        return UNIT_TOKEN
    if isinstance(value, tuple):
        return [value_to_json(v) for v in value]
    return value


def value_from_json(obj, base: str | None = None):
    if isinstance(obj, list):
        return tuple(value_from_json(v) for v in obj)
    if obj == UNIT_TOKEN and (base is None or base == "unit"):
        return UNIT
    if base == "float" and isinstance(obj, int):
        return obj
    return obj


_TYPE_RANK = {Unit: 0, bool: 1, int: 1, float: 1, str: 2, tuple: 3}


def sort_key(value):
    """Total order usable across the value kinds that may share a carrier."""
    if value is UNIT:
        return (0, 0)
    if isinstance(value, tuple):
        return (3, tuple(sort_key(v) for v in value))
    return (_TYPE_RANK.get(type(value), 2), value)


def sorted_values(values):
    return sorted(values, key=sort_key)
