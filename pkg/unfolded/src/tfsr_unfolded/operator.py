"""Sensing-operator import from tfsr-matrix v1 files.

The companion package persists an operator as ``A.mat`` plus a JSON sidecar
and derived companions (``A.pinv.mat``, ``A.cdiag.mat``). Everything here is
read from those files; nothing is recomputed, so both packages share one
source of truth for the operator and its back-projection pieces.
"""

import json
import os

import numpy as np

MAGIC = "tfsr-matrix v1"


def read_matrix(path):
    with open(path, "rb") as fh:
        header = fh.readline().decode("ascii", errors="replace").split()
        if len(header) != 4 or " ".join(header[:2]) != MAGIC:
            raise ValueError(f"{path}: not a {MAGIC} file")
        rows, cols = int(header[2]), int(header[3])
        data = fh.read(rows * cols * 8)
    if len(data) != rows * cols * 8:
        raise ValueError(f"{path}: truncated payload")
    return np.frombuffer(data, dtype="<f8").reshape(rows, cols).copy()


class SensingFiles:
    """Sensing matrix with its pseudoinverse and rescaling diagonal,
    loaded from disk."""

    def __init__(self, matrix_path):
        self.A = read_matrix(matrix_path)
        with open(str(matrix_path) + ".json") as fh:
            self.meta = json.load(fh)
        self.m, self.n = self.A.shape
        if (self.m, self.n) != (self.meta["m"], self.meta["n"]):
            raise ValueError("sidecar shape disagrees with matrix file")
        base_dir = os.path.dirname(os.path.abspath(matrix_path))
        pinv_file = self.meta.get("pinv_file")
        cdiag_file = self.meta.get("cdiag_file")
        if not pinv_file or not cdiag_file:
            raise ValueError(
                "operator file lacks the derived companions; regenerate it "
                "without --no-derived")
        self.pinv = read_matrix(os.path.join(base_dir, pinv_file))
        self.c_diag = read_matrix(os.path.join(base_dir, cdiag_file)).reshape(-1)
        if self.pinv.shape != (self.n, self.m) or self.c_diag.shape != (self.n,):
            raise ValueError("derived companion shapes are inconsistent")
