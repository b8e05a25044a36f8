"""CSV matrices and JSON documents with reproducible formatting."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import InvalidData

SCHEMA_VERSION = 1


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a numeric CSV; a first row containing non-numeric cells is a header.

    Raises :class:`InvalidData` naming the 1-based line and column of the
    first unparsable cell.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [row for row in csv.reader(fh) if row and any(c.strip() for c in row)]
    except OSError as exc:
        raise InvalidData(f"{path}: {exc.strerror}") from None
    if not rows:
        raise InvalidData(f"{path}: file is empty")
    offset = 1
    if not all(_is_number(c.strip()) for c in rows[0]):
        rows = rows[1:]
        offset = 2
    if not rows:
        raise InvalidData(f"{path}: header but no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise InvalidData(f"{path}: line {i + offset} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            try:
                out[i, j] = float(cell)
            except ValueError:
                raise InvalidData(f"{path}: non-numeric value {cell.strip()!r} at "
                                  f"line {i + offset}, column {j + 1}") from None
    if not np.all(np.isfinite(out)):
        i, j = np.argwhere(~np.isfinite(out))[0]
        raise InvalidData(f"{path}: non-finite value at line {i + offset}, column {j + 1}")
    return out


def format_float(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")


def write_matrix(path: str | Path, m: np.ndarray, header: Sequence[str] | None = None) -> None:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    lines = []
    if header is not None:
        lines.append(",".join(header))
    for row in m:
        lines.append(",".join(f"{v:.17g}" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_table(path: str | Path, records: list[dict], columns: Sequence[str]) -> None:
    """Write dict records as CSV with floats in shortest round-trip form."""
    def cell(v):
        if v is None:
            return ""
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return format_float(v)
        return str(v)

    lines = [",".join(columns)]
    for rec in records:
        lines.append(",".join(cell(rec.get(c)) for c in columns))
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    return obj


def write_json(path: str | Path, doc: dict) -> None:
    text = json.dumps(_jsonable(doc), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n")


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
