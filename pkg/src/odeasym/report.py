"""Residual reports and deterministic JSON serialisation.

Report JSON is written with floats fixed to 17 significant digits and no
timestamps, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


@dataclass(frozen=True)
class ResidualReport:
    """Outcome of an identity check: worst residual against a tolerance."""

    name: str
    max_residual: float
    tol: float
    passed: bool
    at_t: Optional[float] = None
    details: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {"name": self.name, "max_residual": self.max_residual,
               "tol": self.tol, "passed": self.passed}
        if self.at_t is not None:
            out["at_t"] = self.at_t
        if self.details:
            out["details"] = self.details
        return out


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x, ".17g")


def _escape(s: str) -> str:
    out = []
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return "".join(out)


def to_json(obj, indent: int = 0) -> str:
    """Serialise dicts/lists/scalars to JSON with fixed float formatting."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return f'"{_escape(obj)}"'
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{inner}"{_escape(str(k))}": {to_json(v, indent + 2)}'
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + f"\n{pad}}}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{inner}{to_json(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + f"\n{pad}]"
    # numpy scalars and anything float-like
    try:
        return _fmt_float(float(obj))
    except (TypeError, ValueError):
        raise TypeError(f"cannot serialise {type(obj).__name__} to JSON")


def format_value(x: float) -> str:
    """17-significant-digit text form used in CSV output."""
    return format(float(x), ".17g")
