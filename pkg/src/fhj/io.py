"""CSV artifacts: ``#`` metadata lines, a header row, then numeric rows.

Floats are written with 17 significant digits so that reading a file back
reproduces the arrays bit for bit.
"""

from __future__ import annotations

import csv
import io as _io
import os
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "{:.16e}"


def format_float(v: float) -> str:
    return FLOAT_FORMAT.format(float(v))


def write_csv(path, columns: dict[str, np.ndarray], meta: dict | None = None) -> Path:
    """Write equal-length columns in the given order, metadata first."""
    path = Path(path)
    names = list(columns)
    arrays = [np.asarray(columns[k], dtype=float).ravel() for k in names]
    if arrays and any(a.size != arrays[0].size for a in arrays):
        raise ValueError("columns differ in length")
    buf = _io.StringIO()
    for key, value in (meta or {}).items():
        text = str(value).replace("\n", " ")
        buf.write(f"# {key} = {text}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in zip(*arrays):
        w.writerow([format_float(v) for v in row])
    tmp = path.with_name(path.name + ".part")
    tmp.write_text(buf.getvalue(), encoding="utf-8")
    os.replace(tmp, path)
    return path


def read_csv(path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """Inverse of :func:`write_csv`: ``(metadata, columns)``."""
    meta: dict[str, str] = {}
    body = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" = ")
                meta[key.strip()] = value
            else:
                body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ValueError(f"{path}: no header row")
    names = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float).reshape(-1, len(names))
    return meta, {k: data[:, j].copy() for j, k in enumerate(names)}
