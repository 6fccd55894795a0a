"""Number formatting and mesh family parsing."""
from __future__ import annotations

import math
import re

_FAMILY_RE = re.compile(r"^\s*([a-z]+)\s*(?:\(\s*(.*?)\s*\))?\s*$")
_PARAM_RE = re.compile(r"^\s*([A-Za-z_0-9]+)\s*=\s*([-+0-9.eE]+)\s*$")

# Aliases accepted in family strings, mapped onto RunConfig fields.
FAMILY_PARAMETERS: dict[str, tuple[str, type]] = {
    "beta": ("beta", float),
    "N": ("base_levels", int),
    "corner_cells": ("corner_cells", int),
    "eps": ("epsilon", float),
    "epsilon": ("epsilon", float),
    "n0": ("n0", int),
    "corner_passes": ("corner_passes", int),
}


def format_float(value: float | None) -> str:
    """Shortest round-trip text of a float; empty for missing values."""
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    return repr(value)


def parse_float(text: str) -> float | None:
    """Inverse of :func:`format_float`."""
    text = text.strip()
    if not text:
        return None
    return float(text)


def parse_family(text: str) -> tuple[str, dict[str, float | int]]:
    """Parse ``kind`` or ``kind(key=value, ...)`` into a kind and RunConfig overrides.

    Accepts the strings produced by ``MeshFamily.describe`` such as
    ``geometric(beta=0.9, N=4)``.
    """
    match = _FAMILY_RE.match(text)
    if not match:
        raise ValueError(f"Invalid mesh family: {text!r}")
    kind, body = match.group(1), match.group(2)
    overrides: dict[str, float | int] = {}
    if body:
        for item in body.split(","):
            param = _PARAM_RE.match(item)
            if not param:
                raise ValueError(f"Invalid family parameter {item.strip()!r} in {text!r}")
            key, raw = param.groups()
            if key not in FAMILY_PARAMETERS:
                raise ValueError(
                    f"Unknown family parameter '{key}'. "
                    f"Supported: {', '.join(FAMILY_PARAMETERS)}"
                )
            name, cast = FAMILY_PARAMETERS[key]
            try:
                overrides[name] = cast(raw)
            except ValueError as exc:
                raise ValueError(f"Family parameter '{key}' expects {cast.__name__}, got {raw!r}") from exc
    return kind, overrides
