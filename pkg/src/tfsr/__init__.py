"""Tight-frame (back-projection) analysis-sparse signal recovery."""

from . import bench, bounds, fileio, frames, matrixlab, signalgen, solvers
from .frames import (
    IdentityDictionary,
    SensingOperator,
    TightDictionary,
    bnorm_residual,
    effective_tightness,
    generate_sensing,
    grad_fidelity,
    overcomplete_dct,
)
from .signalgen import ProblemInstance, batch_instances, make_instance, rsnr
from .solvers import RecoveryResult, SolverSpec, soft_threshold, solve

__version__ = "0.1.0"

__all__ = [
    "IdentityDictionary",
    "ProblemInstance",
    "RecoveryResult",
    "SensingOperator",
    "SolverSpec",
    "TightDictionary",
    "batch_instances",
    "bench",
    "bnorm_residual",
    "bounds",
    "effective_tightness",
    "fileio",
    "frames",
    "generate_sensing",
    "grad_fidelity",
    "make_instance",
    "matrixlab",
    "overcomplete_dct",
    "rsnr",
    "signalgen",
    "soft_threshold",
    "solve",
    "solvers",
]
