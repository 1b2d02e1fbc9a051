"""Plain-text config handling: INI-style `key = value` files with sections."""

from __future__ import annotations

import configparser

from .errors import DataError


def load_config(path) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise DataError(f"config file not found: {path}")
    return parser


def parse_floats(value: str) -> list[float]:
    try:
        return [float(tok) for tok in value.replace(",", " ").split()]
    except ValueError as exc:
        raise DataError(f"expected numbers, got {value!r}") from exc


def parse_ints(value: str) -> list[int]:
    floats = parse_floats(value)
    ints = [int(round(x)) for x in floats]
    if any(abs(i - x) > 1e-9 for i, x in zip(ints, floats)):
        raise DataError(f"expected integers, got {value!r}")
    return ints


def parse_bool(value: str) -> bool:
    norm = value.strip().lower()
    if norm in ("1", "true", "yes", "on"):
        return True
    if norm in ("0", "false", "no", "off"):
        return False
    raise DataError(f"expected a boolean, got {value!r}")


def parse_tokens(value: str) -> list[str]:
    return value.replace(",", " ").split()
