"""Deterministic CSV and JSON writers.

CSV floats are written in scientific notation with 17 significant digits,
which round-trips every double exactly and does not depend on the locale.
JSON uses the shortest decimal that round-trips.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


def fmt_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.16e}"


def _fmt_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def write_csv(path, columns: dict, metadata: dict | None = None) -> Path:
    """Write equal-length columns with a '#'-prefixed metadata block and a header row."""
    names = list(columns)
    data = [np.asarray(columns[n]) for n in names]
    lengths = {len(d) for d in data}
    if len(lengths) > 1:
        raise ValueError("columns must have equal length")
    buf = io.StringIO()
    for key, val in (metadata or {}).items():
        buf.write(f"# {key}: {val}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*data):
        writer.writerow([_fmt_cell(v) for v in row])
    path = Path(path)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def read_csv(path) -> dict:
    """Inverse of ``write_csv`` for numeric columns; returns (metadata, columns)."""
    meta, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(": ")
            meta[key] = val
        else:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    rows = [[float(c) for c in r] for r in reader]
    arr = np.array(rows).reshape(len(rows), len(header))
    return meta, {h: arr[:, i] for i, h in enumerate(header)}


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj) -> str:
    """Sorted keys, fixed indentation; floats as shortest round-trip decimals, NaN as null."""
    return json.dumps(_to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps_json(obj), encoding="utf-8")
    return path
