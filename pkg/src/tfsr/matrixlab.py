"""Dense real linear-algebra kernels used throughout the library.

All kernels operate on 64-bit float arrays. Stated tolerances are absolute
unless marked relative.
"""

import numpy as np
import scipy.linalg as sla

from .errors import (
    DegenerateColumnError,
    NotPositiveDefiniteError,
    ShapeError,
    SymmetryError,
)

# Eigenvalues below PD_FLOOR_REL * lambda_max reject a matrix as not
# positive definite (guards the inverse square root against numerically
# singular Gram matrices).
PD_FLOOR_REL = 1e-12


class SymEigen:
    """Symmetric eigendecomposition with eigenvalues sorted descending.

    ``eigenvectors`` has orthonormal columns; the input is reconstructed by
    ``V @ diag(w) @ V.T``.
    """

    __slots__ = ("eigenvalues", "eigenvectors")

    def __init__(self, eigenvalues, eigenvectors):
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors

    def reconstruct(self):
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _as_float_matrix(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def sym_eigen(m, sym_rtol=1e-12):
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Raises ``ShapeError`` for non-square input and ``SymmetryError`` when the
    relative asymmetry exceeds ``sym_rtol``.
    """
    m = _as_float_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected square matrix, got {m.shape}")
    scale = np.abs(m).max()
    if scale > 0 and np.abs(m - m.T).max() > sym_rtol * scale:
        raise SymmetryError("matrix is not symmetric within tolerance")
    w, v = sla.eigh(m)
    return SymEigen(w[::-1].copy(), v[:, ::-1].copy())


def inv_sqrt_pd(m):
    """Inverse square root of a symmetric positive-definite matrix.

    Computed through a full symmetric eigendecomposition; the result ``R``
    is symmetric and satisfies ``R @ R @ m = I`` to working precision.
    """
    eig = sym_eigen(m)
    w = eig.eigenvalues
    floor = PD_FLOOR_REL * w[0] if w[0] > 0 else 0.0
    if w[-1] <= floor or w[0] <= 0:
        raise NotPositiveDefiniteError(
            f"smallest eigenvalue {w[-1]:.3e} at or below PD floor {floor:.3e}"
        )
    v = eig.eigenvectors
    r = (v / np.sqrt(w)) @ v.T
    return 0.5 * (r + r.T)


def pinv_rowfull(a):
    """Pseudoinverse ``A.T @ inv(A A.T)`` of a matrix with full row rank.

    Requires ``m <= n``; raises ``NotPositiveDefiniteError`` when ``A A.T``
    is numerically rank deficient.
    """
    a = _as_float_matrix(a)
    m, n = a.shape
    if m > n:
        raise ShapeError(f"expected a wide matrix (m <= n), got {a.shape}")
    gram = a @ a.T
    w = sla.eigvalsh(gram)
    if w[0] <= PD_FLOOR_REL * max(w[-1], 0.0) or w[-1] <= 0:
        raise NotPositiveDefiniteError("A A.T is numerically rank deficient")
    c, low = sla.cho_factor(gram, lower=True)
    return sla.cho_solve((c, low), a).T


def spectral_norm(a):
    """Largest singular value of ``a``."""
    a = _as_float_matrix(a)
    if a.size == 0 or not a.any():
        return 0.0
    return float(sla.svdvals(a)[0])


def restricted_cond(a, rtol=1e-10):
    """Ratio of the largest to the smallest nonzero singular value.

    Singular values at or below ``rtol * sigma_max`` count as zero.
    """
    a = _as_float_matrix(a)
    s = sla.svdvals(a)
    smax = s[0]
    if smax == 0:
        raise ValueError("zero matrix has no nonzero singular values")
    nz = s[s > rtol * smax]
    return float(smax / nz[-1])


def coherence(a):
    """Largest absolute normalized inner product over distinct column pairs.

    Raises ``DegenerateColumnError`` when a column is (near-)zero.
    """
    a = _as_float_matrix(a)
    norms = np.linalg.norm(a, axis=0)
    if np.any(norms < 1e-300):
        raise DegenerateColumnError("zero column encountered")
    g = (a / norms).T @ (a / norms)
    np.fill_diagonal(g, 0.0)
    return float(np.abs(g).max())


def welch_bound(m, n):
    """Coherence lower bound sqrt((n - m) / (m (n - 1))) for n > m >= 1."""
    if not (n > m >= 1):
        raise ShapeError(f"welch bound requires n > m >= 1, got m={m}, n={n}")
    return float(np.sqrt((n - m) / (m * (n - 1.0))))
