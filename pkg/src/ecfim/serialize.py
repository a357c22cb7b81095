"""Deterministic text rendering for machine-readable outputs.

Every numeric value is printed with 17 significant digits (%.17g), which
round-trips IEEE doubles exactly, so identical inputs always produce
byte-identical files.
"""

import json
import math

import numpy as np


def fmt17(value):
    """Render a number with 17 significant digits."""
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("fmt17 does not format booleans")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return format(x, ".17g")


def render_json(obj, indent=0):
    """JSON text with fmt17 numbers, preserving dict insertion order."""
    pad = " " * indent
    inner = " " * (indent + 2)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = [
            f"{inner}{json.dumps(str(k))}: {render_json(v, indent + 2)}"
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(np.asarray(obj).tolist()) if isinstance(obj, np.ndarray) else list(obj)
        if not seq:
            return "[]"
        parts = [f"{inner}{render_json(v, indent + 2)}" for v in seq]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    return fmt17(obj)


def matrix_to_csv_text(matrix, header):
    """Row-major CSV with a header row of column labels."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [",".join(str(h) for h in header)]
    for row in matrix:
        lines.append(",".join(fmt17(v) for v in row))
    return "\n".join(lines) + "\n"
