"""Reading and writing the "tfsr-matrix v1" container and JSON sidecars.

Format: one ASCII header line ``tfsr-matrix v1 <rows> <cols>\\n`` followed by
``rows * cols`` little-endian 64-bit floats in row-major order.
"""

import json

import numpy as np

MAGIC = "tfsr-matrix v1"


def write_matrix(path, a):
    a = np.ascontiguousarray(np.atleast_2d(np.asarray(a, dtype=np.float64)))
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {a.shape}")
    with open(path, "wb") as fh:
        fh.write(f"{MAGIC} {a.shape[0]} {a.shape[1]}\n".encode("ascii"))
        fh.write(a.astype("<f8").tobytes())


def read_matrix(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        parts = header.split()
        if parts[: len(MAGIC.split())] != MAGIC.split() or len(parts) != 4:
            raise ValueError(f"{path}: not a {MAGIC} file (header {header!r})")
        rows, cols = int(parts[2]), int(parts[3])
        data = fh.read(rows * cols * 8)
    if len(data) != rows * cols * 8:
        raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(data, dtype="<f8").reshape(rows, cols).copy()


def write_vector(path, v):
    write_matrix(path, np.asarray(v, dtype=np.float64).reshape(-1, 1))


def read_vector(path):
    a = read_matrix(path)
    if 1 not in a.shape:
        raise ValueError(f"{path}: expected a vector, got shape {a.shape}")
    return a.reshape(-1)


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
