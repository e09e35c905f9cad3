"""Matrix file formats: CSV (rows = channels) and a raw binary layout.

The binary layout is an 8-byte magic, two little-endian u32 for the row and
column counts, then float64 values in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Union

import numpy as np

MAGIC = b"ADISBIN1"

PathLike = Union[str, Path]


def save_matrix_csv(path: PathLike, values: np.ndarray,
                    header: list[str] | None = None) -> None:
    values = np.atleast_2d(np.asarray(values, dtype=float))
    with open(path, "w") as fh:
        if header is not None:
            fh.write(",".join(header) + "\n")
        for row in values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_matrix_csv(path: PathLike) -> np.ndarray:
    """Read a numeric CSV matrix, skipping one header line if present."""
    with open(path) as fh:
        first = fh.readline()
        if not first:
            raise ValueError(f"{path}: empty file")
        try:
            [float(tok) for tok in first.strip().split(",") if tok != ""]
            skip = 0
        except ValueError:
            skip = 1
    data = np.loadtxt(path, delimiter=",", skiprows=skip, ndmin=2)
    return data


def save_matrix_binary(path: PathLike, values: np.ndarray) -> None:
    values = np.atleast_2d(np.ascontiguousarray(values, dtype="<f8"))
    p, n = values.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", p, n))
        fh.write(values.tobytes())


def load_matrix_binary(path: PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        p, n = struct.unpack("<II", fh.read(8))
        buf = fh.read(8 * p * n)
        if len(buf) != 8 * p * n:
            raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(buf, dtype="<f8").reshape(p, n).astype(float)


def load_matrix(path: PathLike) -> np.ndarray:
    """Dispatch on content: binary magic first, CSV otherwise."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == MAGIC:
        return load_matrix_binary(path)
    return load_matrix_csv(path)
