"""CSV and JSON plumbing for the command line tools.

Numbers are written with 17 significant digits so every emitted file
parses back to the exact same doubles.
"""

import csv
import json

import numpy as np

from .core import GroupPartition
from .exceptions import InputError

FLOAT_FORMAT = "%.17g"


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % value
    return str(value)


def write_matrix_csv(path, matrix):
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    with open(path, "w", encoding="utf-8", newline="") as handle:
        for row in matrix:
            handle.write(",".join(FLOAT_FORMAT % v for v in row) + "\n")


def read_matrix_csv(path):
    """Read a headerless numeric CSV into a 2-d array."""
    rows = []
    width = None
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read matrix: {exc.strerror}", path=path) from None
    with handle:
        for lineno, record in enumerate(csv.reader(handle), start=1):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise InputError(
                    f"expected {width} columns, found {len(record)}", path=path, line=lineno
                )
            values = []
            for col, token in enumerate(record, start=1):
                try:
                    values.append(float(token))
                except ValueError:
                    raise InputError(
                        f"bad number {token.strip()!r}", path=path, line=lineno, column=col
                    ) from None
            rows.append(values)
    if not rows:
        raise InputError("matrix file is empty", path=path)
    return np.asarray(rows)


def write_rows_csv(path, rows, columns):
    """Write dict rows under a fixed header."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def read_rows_csv(path):
    """Read a headered CSV back into dict rows of strings."""
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read table: {exc.strerror}", path=path) from None
    with handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("table file is empty", path=path) from None
        rows = []
        for lineno, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise InputError(
                    f"expected {len(header)} columns, found {len(record)}",
                    path=path,
                    line=lineno,
                )
            rows.append(dict(zip(header, record)))
    return rows


def write_groups_csv(path, partition):
    """Write a partition as 1-based (row, col, group) triples."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["row", "col", "group"])
        labels = partition.labels
        for i in range(labels.shape[0]):
            for k in range(labels.shape[1]):
                writer.writerow([i + 1, k + 1, int(labels[i, k]) + 1])


def read_groups_csv(path, p, q):
    """Read 1-based (row, col, group) triples covering every cell once."""
    labels = np.full((p, q), -1, dtype=np.int64)
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read groups: {exc.strerror}", path=path) from None
    with handle:
        reader = csv.reader(handle)
        first = True
        for lineno, record in enumerate(reader, start=1):
            if not record or (len(record) == 1 and not record[0].strip()):
                continue
            if first:
                first = False
                if [t.strip().lower() for t in record] == ["row", "col", "group"]:
                    continue
            if len(record) != 3:
                raise InputError("expected 'row,col,group'", path=path, line=lineno)
            try:
                i, k, g = (int(t) for t in record)
            except ValueError:
                raise InputError("group entries must be integers", path=path, line=lineno) from None
            if not (1 <= i <= p and 1 <= k <= q):
                raise InputError(
                    f"cell ({i}, {k}) outside a {p}x{q} coefficient matrix", path=path, line=lineno
                )
            if g < 1:
                raise InputError("group ids are 1-based", path=path, line=lineno)
            if labels[i - 1, k - 1] != -1:
                raise InputError(f"cell ({i}, {k}) assigned twice", path=path, line=lineno)
            labels[i - 1, k - 1] = g - 1
    if (labels < 0).any():
        i, k = np.argwhere(labels < 0)[0]
        raise InputError(f"cell ({i + 1}, {k + 1}) has no group", path=path)
    # compact ids, preserving their order
    ids = np.unique(labels)
    remap = {g: j for j, g in enumerate(ids)}
    compact = np.vectorize(remap.get)(labels)
    return GroupPartition(compact)


def read_series_csv(path):
    """Read a T-by-q series table; a non-numeric first row is a header.

    Returns (series, names) with names None when no header is present.
    """
    try:
        handle = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise InputError(f"cannot read series: {exc.strerror}", path=path) from None
    with handle:
        records = [(lineno, rec) for lineno, rec in enumerate(csv.reader(handle), start=1)
                   if rec and not (len(rec) == 1 and not rec[0].strip())]
    if not records:
        raise InputError("series file is empty", path=path)
    names = None
    start = 0
    try:
        [float(t) for t in records[0][1]]
    except ValueError:
        names = [t.strip() for t in records[0][1]]
        start = 1
    width = None
    rows = []
    for lineno, record in records[start:]:
        if width is None:
            width = len(record)
        elif len(record) != width:
            raise InputError(
                f"expected {width} columns, found {len(record)}", path=path, line=lineno
            )
        values = []
        for col, token in enumerate(record, start=1):
            try:
                values.append(float(token))
            except ValueError:
                raise InputError(
                    f"bad number {token.strip()!r}", path=path, line=lineno, column=col
                ) from None
        rows.append(values)
    if not rows:
        raise InputError("series file has a header but no data", path=path)
    if names is not None and len(names) != len(rows[0]):
        raise InputError("header width does not match the data", path=path, line=records[0][0])
    return np.asarray(rows), names


def write_edges_csv(path, edges, columns):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(columns)
        for edge in edges:
            writer.writerow(edge)


def write_json(path, payload):
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
