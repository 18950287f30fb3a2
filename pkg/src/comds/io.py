"""CSV and JSON files used by the command line.

Embedding CSV: a header row whose first cell is ``id``, then one row per
sample with its id and coordinates.  Distance CSV: the same, with the
header listing every sample id so the body is the square matrix.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

import numpy as np

from .core import ConsensusError, DistanceMatrix


class CsvFormatError(ConsensusError):
    def __init__(self, path, line, column, message):
        self.path, self.line, self.column = str(path), line, column
        super().__init__(f"{path}:{line}:{column}: {message}")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _rows(path):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise CsvFormatError(path, 1, 1, f"not UTF-8 ({exc.reason})") from None
    except OSError as exc:
        raise ConsensusError(f"{path}: {exc.strerror}") from None


def read_table(path):
    """Parse an ``id``-keyed numeric CSV into ``(header, ids, values)``."""
    rows = _rows(path)
    if not rows:
        raise CsvFormatError(path, 1, 1, "empty file")
    header = rows[0]
    if not header or header[0].strip() != "id":
        raise CsvFormatError(path, 1, 1, "first header cell must be 'id'")
    width = len(header)
    if width < 2:
        raise CsvFormatError(path, 1, 2, "no coordinate columns")
    ids, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != width:
            raise CsvFormatError(path, lineno, min(len(row), width) + 1,
                                 f"expected {width} fields, found {len(row)}")
        ids.append(row[0])
        vals = []
        for col, cell in enumerate(row[1:], start=2):
            try:
                v = float(cell)
            except ValueError:
                raise CsvFormatError(path, lineno, col, f"not a number: {cell!r}") from None
            if not np.isfinite(v):
                raise CsvFormatError(path, lineno, col, f"non-finite value: {cell!r}")
            vals.append(v)
        values.append(vals)
    if not ids:
        raise CsvFormatError(path, 2, 1, "no data rows")
    return [h.strip() for h in header], ids, np.array(values, dtype=float)


def is_distance_table(header, ids, values) -> bool:
    n = len(ids)
    return (values.shape == (n, n) and header[1:] == list(ids)
            and np.all(np.diag(values) == 0))


def read_embedding(path):
    header, ids, values = read_table(path)
    return ids, values


def read_distance(path):
    header, ids, values = read_table(path)
    if values.shape != (len(ids), len(ids)) or header[1:] != ids:
        raise CsvFormatError(path, 1, 2, "header ids do not match row ids of a square matrix")
    try:
        return ids, DistanceMatrix(values)
    except ConsensusError as exc:
        raise ConsensusError(f"{path}: {exc}") from None


def read_any(path):
    """Read an embedding or distance CSV; returns ``(ids, kind, array)``."""
    header, ids, values = read_table(path)
    if is_distance_table(header, ids, values):
        try:
            return ids, "distance", DistanceMatrix(values).values
        except ConsensusError as exc:
            raise ConsensusError(f"{path}: {exc}") from None
    return ids, "embedding", values


def atomic_write(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def table_text(header, ids, values) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i, row in zip(ids, np.atleast_2d(values)):
        writer.writerow([i, *(fmt(v) for v in row)])
    return buf.getvalue()


def write_embedding(path, ids, values, prefix="dim"):
    values = np.atleast_2d(np.asarray(values, dtype=float))
    header = ["id", *(f"{prefix}{a + 1}" for a in range(values.shape[1]))]
    atomic_write(path, table_text(header, ids, values))


def write_distance(path, ids, d):
    values = d.values if isinstance(d, DistanceMatrix) else np.asarray(d, dtype=float)
    atomic_write(path, table_text(["id", *ids], ids, values))


def write_labels(path, ids, labels, name="label"):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", name])
    for i, lab in zip(ids, labels):
        writer.writerow([i, lab])
    atomic_write(path, buf.getvalue())


def read_labels(path):
    rows = _rows(path)
    if not rows or not rows[0] or rows[0][0].strip() != "id" or len(rows[0]) < 2:
        raise CsvFormatError(path, 1, 1, "expected header 'id,<label>'")
    out = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) < 2:
            raise CsvFormatError(path, lineno, len(row) + 1, "missing label")
        out[row[0]] = row[1]
    return out


def write_json(path, obj):
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")
