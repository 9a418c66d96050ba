"""CSV readers and writers. Player ids in files are 1-based.

Formats
-------
edges      ``src,dst``; row ``i,j`` means ``j`` is a friend of ``i``.
covariates ``id,<var1>,<var2>,...``; one row per player.
outcomes   ``id,y``.
profile    ``id,p0,...,pK``.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .network import DirectedNetwork, NetworkError

MISSING_TOKENS = {"", "na", "nan", "null", "."}


class SchemaError(ValueError):
    """Malformed input file; the message names file, row and column."""

    def __init__(self, path, row, column, message):
        self.path, self.row, self.column = str(path), row, column
        where = f"{path}"
        if row is not None:
            where += f", row {row}"
        if column is not None:
            where += f", column {column!r}"
        super().__init__(f"{where}: {message}")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _open_rows(path, expected_header=None):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(path, 1, None, "file is empty; a header row is required") from None
        if expected_header is not None and header != expected_header:
            raise SchemaError(path, 1, None, f"expected header {','.join(expected_header)}, got {','.join(header)}")
        rows = [(lineno, row) for lineno, row in enumerate(reader, start=2) if any(c.strip() for c in row)]
    return header, rows


def _int_cell(path, lineno, col, value) -> int:
    try:
        f = float(value)
    except ValueError:
        raise SchemaError(path, lineno, col, f"not an integer: {value!r}") from None
    if not math.isfinite(f) or f != int(f):
        raise SchemaError(path, lineno, col, f"not an integer: {value!r}")
    return int(f)


def read_edges(path, n: int) -> DirectedNetwork:
    _, rows = _open_rows(path, ["src", "dst"])
    lists: list[list[int]] = [[] for _ in range(n)]
    seen = set()
    for lineno, row in rows:
        if len(row) != 2:
            raise SchemaError(path, lineno, None, f"expected 2 fields, got {len(row)}")
        i = _int_cell(path, lineno, "src", row[0])
        j = _int_cell(path, lineno, "dst", row[1])
        for col, v in (("src", i), ("dst", j)):
            if not 1 <= v <= n:
                raise SchemaError(path, lineno, col, f"player id {v} outside 1..{n}")
        if i == j:
            raise SchemaError(path, lineno, None, f"self-loop {i} -> {j}")
        if (i, j) in seen:
            raise SchemaError(path, lineno, None, f"duplicate edge {i} -> {j}")
        seen.add((i, j))
        lists[i - 1].append(j - 1)
    try:
        return DirectedNetwork.from_friend_lists(lists)
    except NetworkError as exc:  # pragma: no cover - rows are validated above
        raise SchemaError(path, None, None, str(exc)) from exc


def write_edges(path, net: DirectedNetwork) -> None:
    src, dst = net.edges()
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        w.writerows(zip((src + 1).tolist(), (dst + 1).tolist()))


def read_covariates(path, missing: str = "zero") -> tuple[np.ndarray, list[str]]:
    """Covariate matrix ordered by player id, plus the variable names.

    ``missing="zero"`` replaces blank / NA cells with 0; ``"error"`` rejects them.
    """
    if missing not in ("zero", "error"):
        raise ValueError("missing must be 'zero' or 'error'")
    header, rows = _open_rows(path)
    if not header or header[0] != "id" or len(header) < 2:
        raise SchemaError(path, 1, None, "header must be id,<var1>,...")
    names = header[1:]
    if len(set(names)) != len(names):
        raise SchemaError(path, 1, None, "duplicate variable names")
    n = len(rows)
    X = np.empty((n, len(names)))
    filled = np.zeros(n, dtype=bool)
    for lineno, row in rows:
        if len(row) != len(header):
            raise SchemaError(path, lineno, None, f"expected {len(header)} fields, got {len(row)}")
        pid = _int_cell(path, lineno, "id", row[0])
        if not 1 <= pid <= n:
            raise SchemaError(path, lineno, "id", f"ids must run over 1..{n}, got {pid}")
        if filled[pid - 1]:
            raise SchemaError(path, lineno, "id", f"duplicate id {pid}")
        filled[pid - 1] = True
        for c, (name, cell) in enumerate(zip(names, row[1:])):
            cell = cell.strip()
            if cell.lower() in MISSING_TOKENS:
                if missing == "error":
                    raise SchemaError(path, lineno, name, "missing value")
                X[pid - 1, c] = 0.0
                continue
            try:
                v = float(cell)
            except ValueError:
                raise SchemaError(path, lineno, name, f"not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise SchemaError(path, lineno, name, f"non-finite value {cell!r}")
            X[pid - 1, c] = v
    if n == 0:
        raise SchemaError(path, None, None, "no players")
    return X, names


def write_covariates(path, X: np.ndarray, names=None) -> None:
    X = np.asarray(X, dtype=float)
    names = list(names) if names is not None else [f"x{c + 1}" for c in range(X.shape[1])]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *names])
        for i, row in enumerate(X, start=1):
            w.writerow([i, *map(fmt, row)])


def read_outcomes(path, n: int) -> np.ndarray:
    _, rows = _open_rows(path, ["id", "y"])
    Y = np.full(n, -1, dtype=np.int64)
    for lineno, row in rows:
        if len(row) != 2:
            raise SchemaError(path, lineno, None, f"expected 2 fields, got {len(row)}")
        pid = _int_cell(path, lineno, "id", row[0])
        if not 1 <= pid <= n:
            raise SchemaError(path, lineno, "id", f"player id {pid} outside 1..{n}")
        y = _int_cell(path, lineno, "y", row[1])
        if y < 0:
            raise SchemaError(path, lineno, "y", f"action must be >= 0, got {y}")
        if Y[pid - 1] >= 0:
            raise SchemaError(path, lineno, "id", f"duplicate id {pid}")
        Y[pid - 1] = y
    if np.any(Y < 0):
        raise SchemaError(path, None, "id", f"no outcome for player {int(np.argmax(Y < 0)) + 1}")
    return Y


def write_outcomes(path, Y) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "y"])
        w.writerows((i, int(y)) for i, y in enumerate(Y, start=1))


def write_profile(path, sigma) -> None:
    sigma = np.asarray(sigma)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", *[f"p{k}" for k in range(sigma.shape[1])]])
        for i, row in enumerate(sigma, start=1):
            w.writerow([i, *map(fmt, row)])


def write_table(path, header, rows) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating, int, np.integer)) else v for v in row])
