"""CSV ingestion, result tables, and point checkpoints."""
import csv
import math
from pathlib import Path

import numpy as np

from psman.data import Dataset, LabeledDataset
from psman.errors import DataError, EmptyFile, MixedColumnCount, ParseError
from psman.manifold import PartitionSpec, PSPoint

CHECKPOINT_HEADER = "psman-point v1"


def read_table(path, has_header=False, label_column=None):
    """Parse a numeric CSV, optionally splitting off one label column.

    Returns ``(header, features, label_tokens)``; ``header`` is None without
    a header line, ``label_tokens`` is None without a label column.
    ``label_column`` is a header name or an integer index (``-1`` = last).
    Row and column numbers in errors are 1-based file coordinates.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [(reader_line, row) for reader_line, row in _rows(csv.reader(fh))]
    header = None
    if has_header and rows:
        header = [h.strip() for h in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise EmptyFile(f"{path}: no data rows")

    width = len(header) if header is not None else len(rows[0][1])
    for line, row in rows:
        if len(row) != width:
            raise MixedColumnCount(line, width, len(row))

    label_idx = None
    if label_column is not None:
        if isinstance(label_column, str) and not _is_int(label_column):
            if header is None:
                raise DataError("a named label column needs a header line")
            if label_column not in header:
                raise DataError(f"label column {label_column!r} not in header {header}")
            label_idx = header.index(label_column)
        else:
            label_idx = int(label_column) % width
        if width < 2:
            raise DataError("a labelled file needs at least one feature column")

    features = np.empty((len(rows), width - (label_idx is not None)))
    labels = [] if label_idx is not None else None
    for r, (line, row) in enumerate(rows):
        c_out = 0
        for c, cell in enumerate(row):
            if c == label_idx:
                labels.append(cell.strip())
                continue
            try:
                value = float(cell)
            except ValueError:
                raise ParseError(line, c + 1, f"non-numeric value {cell!r}") from None
            if not math.isfinite(value):
                raise ParseError(line, c + 1, f"non-finite value {cell!r}")
            features[r, c_out] = value
            c_out += 1
    if header is not None and label_idx is not None:
        header = header[:label_idx] + header[label_idx + 1 :]
    return header, features, labels


def _rows(reader):
    for row in reader:
        if not row or all(not cell.strip() for cell in row):
            continue
        yield reader.line_num, row


def _is_int(s):
    try:
        int(s)
    except ValueError:
        return False
    return True


def encode_labels(tokens, label_names=()):
    """Map label tokens to dense ids 1..L in first-occurrence order.

    ``label_names`` seeds the mapping so that separately loaded files agree.
    Returns ``(ids, label_names)`` with the possibly extended name tuple.
    """
    names = list(label_names)
    index = {name: i + 1 for i, name in enumerate(names)}
    ids = np.empty(len(tokens), dtype=np.int64)
    for i, tok in enumerate(tokens):
        if tok not in index:
            names.append(tok)
            index[tok] = len(names)
        ids[i] = index[tok]
    return ids, tuple(names)


def ingest_csv(path, has_header=False, label_column=None, label_names=(), name=None):
    """Load a CSV as a :class:`Dataset`, or a :class:`LabeledDataset` when
    ``label_column`` is given."""
    name = name or Path(path).stem
    _, x, tokens = read_table(path, has_header, label_column)
    if tokens is None:
        return Dataset(x, name)
    y, names = encode_labels(tokens, label_names)
    return LabeledDataset(x, y, name, names)


def fmt(value):
    """Shortest round-trip text for a float."""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_checkpoint(point, path):
    spec = point.spec
    lines = [CHECKPOINT_HEADER, " ".join(str(v) for v in (spec.n, *spec.sizes))]
    lines += [" ".join(repr(float(v)) for v in row) for row in point.q]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_checkpoint(path):
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_HEADER:
        raise DataError(f"{path}: not a {CHECKPOINT_HEADER!r} checkpoint")
    try:
        n, *sizes = (int(v) for v in lines[1].split())
    except (IndexError, ValueError):
        raise ParseError(2, 1, "expected n followed by partition sizes") from None
    spec = PartitionSpec(n, tuple(sizes))
    body = lines[2 : 2 + n]
    if len(body) != n:
        raise DataError(f"{path}: expected {n} matrix rows, found {len(body)}")
    q = np.empty((n, n))
    for r, line in enumerate(body):
        cells = line.split()
        if len(cells) != n:
            raise MixedColumnCount(r + 3, n, len(cells))
        for c, cell in enumerate(cells):
            try:
                q[r, c] = float(cell)
            except ValueError:
                raise ParseError(r + 3, c + 1, f"non-numeric value {cell!r}") from None
    return PSPoint(spec, q)
