"""Deterministic CSV and JSON writers with 17 significant digits."""

from __future__ import annotations

import csv
import dataclasses
import enum
import json
import math
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.17g"


def format_float(x) -> str:
    return FLOAT_FORMAT % float(x)


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, enum.Enum):
        return str(x.value)
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format_float(x)
    return str(x)


def write_table(path, header, columns, preamble=()):
    """Write equally long columns as CSV.

    ``preamble`` lines are written first, each prefixed with ``#``.
    """
    path = Path(path)
    rows = zip(*columns)
    with path.open("w", newline="") as fh:
        for line in preamble:
            fh.write(f"#{line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(x) for x in row])


def write_rows(path, header, rows, preamble=()):
    write_table(path, header, list(zip(*rows)) if rows else [[] for _ in header], preamble)


def read_table(path):
    """Read a CSV written by :func:`write_table` into float arrays (skipping ``#`` lines)."""
    with Path(path).open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    data = [row for row in reader]
    out = {}
    for i, name in enumerate(header):
        col = [row[i] for row in data]
        try:
            out[name] = np.array([float(c) if c != "" else math.nan for c in col])
        except ValueError:
            out[name] = col
    return out


def read_preamble(path):
    """Return the ``#``-prefixed lines at the top of a CSV without the marker."""
    lines = []
    with Path(path).open() as fh:
        for ln in fh:
            if not ln.startswith("#"):
                break
            lines.append(ln[1:].rstrip("\n"))
    return lines


def to_jsonable(obj):
    """Convert dataclasses, enums and numpy values into plain JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.repr}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _Float(float(obj))
    if isinstance(obj, Path):
        return str(obj)
    return obj


class _Float(float):
    """Float marker rendered with 17 significant digits."""


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, _Float):
        if math.isnan(obj) or math.isinf(obj):
            return "null"
        return format_float(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return json.dumps(obj)


def dumps(obj, indent=2) -> str:
    return _encode(to_jsonable(obj), indent, 0) + "\n"


def write_json(path, obj):
    Path(path).write_text(dumps(obj))


def read_json(path):
    return json.loads(Path(path).read_text())
