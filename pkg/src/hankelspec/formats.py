"""CSV and JSON serialization shared by the command line tools.

Conventions: every CSV file carries a header row and uses RFC 4180
quoting; complex arrays are stored one entry per row with the K index
columns first (named ``index_1`` .. ``index_K``, zero-based values),
then the real and imaginary parts.  All floats are rendered with 17
significant digits so that double-precision values round-trip exactly.
JSON output uses snake_case keys, sorted for byte determinism; complex
numbers become ``[re, im]`` pairs and non-finite floats become the
strings ``"inf"``, ``"-inf"``, ``"nan"``.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np


def format_float(x) -> str:
    """Render a float with 17 significant digits (lossless for doubles)."""
    return f"{float(x):.17g}"


def _render(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format_float(x)
    if isinstance(obj, (complex, np.complexfloating)):
        z = complex(obj)
        return f"[{_render(z.real)}, {_render(z.imag)}]"
    if isinstance(obj, dict):
        items = ", ".join(
            f"{json.dumps(str(k))}: {_render(v)}" for k, v in sorted(obj.items())
        )
        return "{" + items + "}"
    if isinstance(obj, np.ndarray):
        return _render(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_render(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def dumps_json(obj) -> str:
    """Serialize to JSON text with 17-significant-digit floats."""
    return _render(obj)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(dumps_json(obj))
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_table_csv(path, header, rows) -> None:
    """Write a generic CSV table with RFC 4180 quoting and 17-digit floats."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_complex_array_csv(path, arr) -> None:
    """Write a complex array as (index_1..index_K, re, im) rows in C order."""
    arr = np.asarray(arr)
    header = [f"index_{k + 1}" for k in range(arr.ndim)] + ["re", "im"]
    rows = []
    for idx in np.ndindex(arr.shape):
        z = complex(arr[idx])
        rows.append(list(idx) + [z.real, z.imag])
    write_table_csv(path, header, rows)


def read_complex_array_csv(path) -> np.ndarray:
    """Read back an array written by write_complex_array_csv."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        ndim = len(header) - 2
        indices, values = [], []
        for row in reader:
            indices.append(tuple(int(v) for v in row[:ndim]))
            values.append(complex(float(row[ndim]), float(row[ndim + 1])))
    dims = tuple(max(ix[k] for ix in indices) + 1 for k in range(ndim))
    out = np.zeros(dims, dtype=complex)
    for ix, v in zip(indices, values):
        out[ix] = v
    return out
