"""JSON wire formats.

Real matrices are arrays of rows; a complex entry is a ``[re, im]`` pair.
Output floats are written with 17 significant digits so reports are
byte-identical across runs.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import InputError


def _is_pair(x) -> bool:
    return isinstance(x, (list, tuple)) and len(x) == 2 and all(
        isinstance(y, (int, float)) and not isinstance(y, bool) for y in x)


def _scalar(x):
    if _is_pair(x):
        return complex(float(x[0]), float(x[1]))
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return float(x)
    raise InputError(f"expected a number or [re, im] pair, got {x!r}")


def parse_vector(data) -> np.ndarray:
    if not isinstance(data, (list, tuple)) or len(data) == 0:
        raise InputError("vector must be a non-empty JSON array")
    vals = [_scalar(x) for x in data]
    if any(isinstance(v, complex) for v in vals):
        return np.array(vals, dtype=complex)
    return np.array(vals, dtype=float)


def parse_matrix(data) -> np.ndarray:
    if not isinstance(data, (list, tuple)) or len(data) == 0:
        raise InputError("matrix must be a non-empty array of rows")
    rows = []
    for row in data:
        if not isinstance(row, (list, tuple)):
            raise InputError("matrix rows must be arrays")
        rows.append([_scalar(x) for x in row])
    if len({len(r) for r in rows}) != 1:
        raise InputError("matrix rows have different lengths")
    if any(isinstance(v, complex) for r in rows for v in r):
        return np.array(rows, dtype=complex)
    return np.array(rows, dtype=float)


def encode_vector(v) -> list:
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return [[float(x.real), float(x.imag)] for x in v]
    return [float(x) for x in v]


def encode_matrix(A) -> list:
    return [encode_vector(row) for row in np.asarray(A)]


def load_json_arg(arg: str):
    """Inline JSON text or a path to a JSON file."""
    text = arg.strip()
    try:
        if text[:1] in "{[":
            return json.loads(text)
        with open(arg) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read JSON from {arg!r}: {exc}") from exc


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    sep = "," if indent is None else ","
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode([obj.real, obj.imag], indent, level)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in obj):
            return "[" + ", ".join(_encode(x, None, 0) for x in obj) + "]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[" + sep.join(items) + end + "]"
    if hasattr(obj, "to_json"):
        return _encode(obj.to_json(), indent, level)
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj, indent: int | None = 2) -> str:
    """Deterministic JSON text (fixed 17-digit floats)."""
    return _encode(obj, indent, 0)
