"""Plain-text matrix I/O.

Matrix CSV format: one row per line, comma-separated decimal literals,
no header, row-major.  Vectors are single-column files.  Ragged rows are
rejected on read.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatch


def load_matrix(path) -> np.ndarray:
    rows = []
    width = None
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise DimensionMismatch(
                    f"{path}: ragged row at line {lineno} "
                    f"({len(fields)} fields, expected {width})"
                )
            try:
                rows.append([float(f) for f in fields])
            except ValueError as exc:
                raise DimensionMismatch(f"{path}: bad literal at line {lineno}: {exc}")
    if not rows:
        raise DimensionMismatch(f"{path}: empty matrix file")
    return np.array(rows, dtype=float)


def save_matrix(path, matrix) -> None:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", encoding="ascii") as fh:
        for row in matrix:
            fh.write(",".join(format(v, ".17g") for v in row))
            fh.write("\n")


def load_vector(path) -> np.ndarray:
    mat = load_matrix(path)
    if mat.shape[1] != 1:
        raise DimensionMismatch(
            f"{path}: expected a single-column vector file, got {mat.shape[1]} columns"
        )
    return mat[:, 0]


def save_vector(path, vector) -> None:
    save_matrix(path, np.asarray(vector, dtype=float).reshape(-1, 1))
