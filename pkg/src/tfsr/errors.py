"""Exception types shared across the library."""


class TfsrError(Exception):
    """Base class for all library errors."""


class ShapeError(TfsrError, ValueError):
    """Input dimensions are inconsistent with the operation."""


class SymmetryError(TfsrError, ValueError):
    """A matrix that must be symmetric is not."""


class NotPositiveDefiniteError(TfsrError, ValueError):
    """A Gram matrix has an eigenvalue at or below the positive-definite floor."""


class DegenerateColumnError(TfsrError, ValueError):
    """A matrix contains a (near-)zero column where unit columns are required."""


class UndefinedSnrError(TfsrError, ValueError):
    """SNR is requested for a zero signal."""


class DivergenceError(TfsrError, RuntimeError):
    """A solver objective exploded; carries the offending step size."""

    def __init__(self, eta, detail=""):
        self.eta = eta
        msg = f"solver diverged with step size eta={eta!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class EnumerationCapError(TfsrError, ValueError):
    """Exact support enumeration would exceed the configured cap."""
