"""Sensing ensembles, tight dictionaries, and back-projection operators.

A :class:`SensingOperator` wraps a sensing matrix ``A`` together with the
cached pieces needed by the tight-frame (back-projection) fidelity term:
the row-full pseudoinverse ``A^+``, a triangular factor of ``inv(A A.T)``,
and the rescaling diagonal ``C = diag(A^+ A)``. A :class:`TightDictionary`
is a Parseval-tight analysis/synthesis frame built from randomly selected
rows of an orthonormal DCT-II basis; its transforms run through fast DCTs
rather than dense products.
"""

import os
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.linalg as sla

from . import fileio, matrixlab
from .errors import DegenerateColumnError, ShapeError

DISTRIBUTIONS = ("gaussian", "bernoulli", "uniform", "laplacian")

# Diagonal entries of A^+ A below this are clamped before RTF rescaling.
C_FLOOR = 1e-8


def _draw_entries(rng, distribution, m, n):
    # All parameterizations are zero mean with variance 1/m, so columns have
    # unit norm in expectation before the exact rescaling below.
    if distribution == "gaussian":
        return rng.normal(0.0, 1.0 / np.sqrt(m), size=(m, n))
    if distribution == "bernoulli":
        return (2.0 * rng.integers(0, 2, size=(m, n)) - 1.0) / np.sqrt(m)
    if distribution == "uniform":
        half = np.sqrt(3.0 / m)
        return rng.uniform(-half, half, size=(m, n))
    if distribution == "laplacian":
        return rng.laplace(0.0, 1.0 / np.sqrt(2.0 * m), size=(m, n))
    raise ValueError(f"unknown distribution {distribution!r}")


class SensingOperator:
    """Sensing matrix with cached back-projection operators.

    Attributes
    ----------
    A : (m, n) ndarray
    pinv : (n, m) ndarray, the pseudoinverse ``A.T @ inv(A A.T)``
    gram_chol : (m, m) lower-triangular factor L with ``A A.T = L L.T``
    c_diag : (n,) positive diagonal of ``A^+ A`` (clamped at ``C_FLOOR``)
    spec_norm_sq : float, squared spectral norm of ``A``
    """

    def __init__(self, a, distribution="custom", seed=None, provenance=None,
                 require_unit_columns=True):
        a = np.array(a, dtype=np.float64, order="C")
        if a.ndim != 2:
            raise ShapeError(f"sensing matrix must be 2-D, got {a.shape}")
        m, n = a.shape
        if m > n:
            raise ShapeError(f"expected m <= n, got shape {a.shape}")
        if require_unit_columns:
            norms = np.linalg.norm(a, axis=0)
            if np.abs(norms - 1.0).max() > 1e-8:
                raise DegenerateColumnError(
                    "columns must have unit norm (pass require_unit_columns="
                    "False for intentionally scaled matrices)")
        self.A = a
        self.m, self.n = m, n
        self.distribution = distribution
        self.seed = seed
        self.provenance = dict(provenance or {})
        self.pinv = matrixlab.pinv_rowfull(a)
        self.gram_chol = sla.cholesky(a @ a.T, lower=True)
        c = np.einsum("ij,ji->i", self.pinv, a)
        self.c_diag = np.maximum(c, C_FLOOR)
        self.spec_norm_sq = matrixlab.spectral_norm(a) ** 2
        for arr in (self.A, self.pinv, self.gram_chol, self.c_diag):
            arr.setflags(write=False)

    @cached_property
    def gram_eigen(self):
        """Eigendecomposition of ``A A.T`` (descending eigenvalues)."""
        return matrixlab.sym_eigen(self.A @ self.A.T)

    @cached_property
    def b_matrix(self):
        """The explicit whitener ``(A A.T)^{-1/2}``; formed only on request."""
        return matrixlab.inv_sqrt_pd(self.A @ self.A.T)

    @cached_property
    def rtf_lipschitz(self):
        """Spectral norm of ``C^{-1} A^+ A`` (RTF gradient Lipschitz bound)."""
        return matrixlab.spectral_norm((self.pinv / self.c_diag[:, None]) @ self.A)

    def gram_solve(self, r):
        """Apply ``inv(A A.T)`` through the cached triangular factor."""
        z = sla.solve_triangular(self.gram_chol, r, lower=True)
        return sla.solve_triangular(self.gram_chol.T, z, lower=False)

    def half_gram_solve(self, r):
        """Apply ``L^{-1}`` with ``A A.T = L L.T``; then ``||L^{-1} r|| = ||r||_B``."""
        return sla.solve_triangular(self.gram_chol, r, lower=True)


def generate_sensing(m, n, distribution, seed):
    """Draw a seeded random sensing ensemble with exactly unit-norm columns.

    Entries are i.i.d. zero mean with variance ``1/m`` from the named
    distribution, then columns are rescaled to unit l2 norm. Deterministic
    for fixed ``(m, n, distribution, seed)``.
    """
    if not (1 <= m < n):
        raise ShapeError(f"require 1 <= m < n, got m={m}, n={n}")
    if distribution not in DISTRIBUTIONS:
        raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
    rng = np.random.default_rng(seed)
    a = _draw_entries(rng, distribution, m, n)
    provenance = {}
    norms = np.linalg.norm(a, axis=0)
    guard = 0
    while np.any(norms < 1e-300):
        # Probability-zero event; redraw the degenerate columns from the
        # advanced stream position and record which ones were regenerated.
        bad = np.flatnonzero(norms < 1e-300)
        a[:, bad] = _draw_entries(rng, distribution, m, bad.size)
        norms = np.linalg.norm(a, axis=0)
        provenance.setdefault("regenerated_columns", []).extend(bad.tolist())
        guard += 1
        if guard > 100:
            raise DegenerateColumnError("persistent zero columns during generation")
    a /= norms
    return SensingOperator(a, distribution=distribution, seed=seed,
                           provenance=provenance)


class TightDictionary:
    """Parseval-tight frame from ``n`` rows of a ``d x d`` orthonormal DCT-II.

    ``analysis`` computes ``D.T @ x`` and ``synthesis`` computes ``D @ alpha``
    through length-``d`` fast transforms; the dense matrix is materialized
    lazily for code that needs it.
    """

    def __init__(self, n, d, row_selection, seed=None):
        if d < n:
            raise ShapeError(f"require d >= n, got n={n}, d={d}")
        row_selection = np.asarray(row_selection, dtype=np.int64)
        if row_selection.shape != (n,) or np.unique(row_selection).size != n:
            raise ShapeError("row_selection must hold n distinct indices")
        if row_selection.min() < 0 or row_selection.max() >= d:
            raise ShapeError("row_selection index out of range")
        self.n, self.d = n, d
        self.row_selection = np.sort(row_selection)
        self.seed = seed
        self.fft_workers = 1
        self.row_selection.setflags(write=False)

    @cached_property
    def matrix(self):
        """Dense ``(n, d)`` frame matrix."""
        k = self.row_selection[:, None].astype(np.float64)
        j = np.arange(self.d, dtype=np.float64)[None, :]
        dmat = np.cos(np.pi * (2.0 * j + 1.0) * k / (2.0 * self.d))
        dmat *= np.sqrt(2.0 / self.d)
        dmat[self.row_selection == 0, :] = np.sqrt(1.0 / self.d)
        dmat.setflags(write=False)
        return dmat

    def analysis(self, x):
        """``D.T @ x`` for a vector or a matrix of column vectors."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n:
            raise ShapeError(f"expected leading dimension {self.n}, got {x.shape}")
        buf = np.zeros((self.d,) + x.shape[1:], dtype=np.float64)
        buf[self.row_selection] = x
        return scipy.fft.idct(buf, type=2, norm="ortho", axis=0,
                              workers=self.fft_workers)

    def synthesis(self, alpha):
        """``D @ alpha`` for a vector or a matrix of column vectors."""
        alpha = np.asarray(alpha, dtype=np.float64)
        if alpha.shape[0] != self.d:
            raise ShapeError(f"expected leading dimension {self.d}, got {alpha.shape}")
        full = scipy.fft.dct(alpha, type=2, norm="ortho", axis=0,
                             workers=self.fft_workers)
        return full[self.row_selection]


class IdentityDictionary:
    """Identity frame for canonical-sparse problems (``D = I``)."""

    def __init__(self, n):
        self.n = n
        self.d = n
        self.row_selection = np.arange(n)
        self.seed = None

    @cached_property
    def matrix(self):
        return np.eye(self.n)

    def analysis(self, x):
        return np.asarray(x, dtype=np.float64)

    def synthesis(self, alpha):
        return np.asarray(alpha, dtype=np.float64)


def overcomplete_dct(n, d, seed, selection="equispaced"):
    """Tight dictionary from ``n`` rows of the ``d x d`` orthonormal DCT-II.

    Any row subset of an orthogonal matrix is Parseval tight. With
    ``selection="equispaced"`` (default) the rows form a frequency comb of
    stride ``d / n``; the projector ``D.T D`` then aliases each canonical
    spike into at most ``d / n`` spikes, so synthesis-sparse signals stay
    exactly analysis-compressible, which the synthetic recovery benchmarks
    rely on. ``selection="random"`` draws the subset uniformly without
    replacement using the seed; the resulting analysis coefficients of a
    sparse synthesis are dense, which degrades l1-analysis recovery badly.
    """
    if d < n:
        raise ShapeError(f"require d >= n, got n={n}, d={d}")
    if selection == "equispaced":
        sel = np.floor(np.arange(n) * (d / n)).astype(np.int64)
    elif selection == "random":
        rng = np.random.default_rng(seed)
        sel = rng.choice(d, size=n, replace=False)
    else:
        raise ValueError(f"unknown selection rule {selection!r}")
    return TightDictionary(n, d, sel, seed=seed)


def analysis(dictionary, x):
    return dictionary.analysis(x)


def synthesis(dictionary, alpha):
    return dictionary.synthesis(alpha)


def bnorm_of(op, r):
    """Weighted norm ``||r||_B = sqrt(r.T inv(A A.T) r)`` per column."""
    r = np.asarray(r, dtype=np.float64)
    if r.shape[0] != op.m:
        raise ShapeError(f"expected leading dimension {op.m}, got {r.shape}")
    z = op.half_gram_solve(r)
    return np.sqrt(np.sum(z * z, axis=0))


def bnorm_residual(op, x, y):
    """``||A x - y||_B`` computed through the cached triangular factor."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != op.n or y.shape[0] != op.m:
        raise ShapeError("dimension mismatch between operator, x, and y")
    return bnorm_of(op, op.A @ x - y)


def grad_fidelity(op, x, y, mode):
    """Gradient of the data-fidelity term for the selected mode.

    ls  -> ``A.T (A x - y)``             (least squares)
    tf  -> ``A^+ (A x - y)``             (back-projection / B-norm)
    rtf -> ``C^{-1} A^+ (A x - y)``      (rescaled back-projection)
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape[0] != op.n or y.shape[0] != op.m:
        raise ShapeError("dimension mismatch between operator, x, and y")
    r = op.A @ x - y
    mode = mode.lower()
    if mode == "ls":
        return op.A.T @ r
    if mode in ("tf", "rtf"):
        g = op.pinv @ r
        if mode == "rtf":
            g = g / (op.c_diag[:, None] if g.ndim == 2 else op.c_diag)
        return g
    raise ValueError(f"unknown fidelity mode {mode!r}")


def effective_tightness(op):
    """Spectral deviation ``||(B A)(B A).T - I||`` of the effective matrix."""
    e = op.b_matrix @ op.A
    return matrixlab.spectral_norm(e @ e.T - np.eye(op.m))


def fidelity_lipschitz(op, mode):
    """Lipschitz constant of the fidelity gradient for the given mode."""
    mode = mode.lower()
    if mode == "ls":
        return op.spec_norm_sq
    if mode == "tf":
        return 1.0
    if mode == "rtf":
        return op.rtf_lipschitz
    raise ValueError(f"unknown fidelity mode {mode!r}")


def save_operator(op, path, with_derived=True):
    """Persist an operator: matrix file plus JSON sidecar.

    With ``with_derived`` the pseudoinverse and rescaling diagonal are written
    alongside so downstream consumers never recompute them.
    """
    path = str(path)
    fileio.write_matrix(path, op.A)
    sidecar = {
        "m": op.m,
        "n": op.n,
        "distribution": op.distribution,
        "seed": op.seed,
        "spec_norm_sq": op.spec_norm_sq,
    }
    if op.provenance:
        sidecar["provenance"] = op.provenance
    if with_derived:
        base, _ = os.path.splitext(path)
        fileio.write_matrix(base + ".pinv.mat", op.pinv)
        fileio.write_vector(base + ".cdiag.mat", op.c_diag)
        sidecar["pinv_file"] = os.path.basename(base + ".pinv.mat")
        sidecar["cdiag_file"] = os.path.basename(base + ".cdiag.mat")
    fileio.write_json(path + ".json", sidecar)


def load_operator(path):
    a = fileio.read_matrix(str(path))
    sidecar = fileio.read_json(str(path) + ".json")
    if a.shape != (sidecar["m"], sidecar["n"]):
        raise ShapeError("sidecar shape disagrees with matrix file")
    return SensingOperator(a, distribution=sidecar["distribution"],
                           seed=sidecar["seed"],
                           provenance=sidecar.get("provenance"),
                           require_unit_columns=False)


def save_dictionary(dct, path):
    fileio.write_json(str(path), {
        "n": dct.n,
        "d": dct.d,
        "seed": dct.seed,
        "row_selection": dct.row_selection.tolist(),
    })


def load_dictionary(path):
    meta = fileio.read_json(str(path))
    return TightDictionary(meta["n"], meta["d"], np.asarray(meta["row_selection"]),
                           seed=meta["seed"])
