"""CSV and JSON helpers shared by the CLI.

Tables are UTF-8, comma separated, with a header row. Reals are written
with ``repr`` so a read-back reproduces every value bit for bit.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Unreadable or malformed input file."""


def read_table(path) -> tuple[list[str], np.ndarray]:
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        rows = []
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric field in {row!r}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return header, np.asarray(rows, dtype=np.float64)


def write_table(path, header, data) -> None:
    data = np.asarray(data, dtype=np.float64)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def feature_names(d: int, prefix: str = "x") -> list[str]:
    return [f"{prefix}{j}" for j in range(d)]


def read_xy(path, require_y=True):
    """Read an ``x0..x{D-1}[,y]`` table. Returns (X, y or None)."""
    header, data = read_table(path)
    xcols = [i for i, h in enumerate(header) if h.startswith("x") and h[1:].isdigit()]
    if not xcols:
        raise DataError(f"{path}: no x0..x{{D-1}} feature columns in header")
    xnames = [header[i] for i in xcols]
    if xnames != feature_names(len(xcols)):
        raise DataError(f"{path}: feature columns must be x0..x{len(xcols) - 1} in order")
    y = None
    if "y" in header:
        y = data[:, header.index("y")]
    elif require_y:
        raise DataError(f"{path}: missing target column 'y'")
    return data[:, xcols], y


def write_xy(path, X, y=None) -> None:
    header = feature_names(X.shape[1])
    data = X
    if y is not None:
        header = header + ["y"]
        data = np.column_stack([X, y])
    write_table(path, header, data)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, allow_nan=False)
        fh.write("\n")


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"{path}: cannot open ({exc.strerror})") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
