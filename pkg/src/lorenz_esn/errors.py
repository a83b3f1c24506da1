"""Exception types raised across the package."""


class DivergenceError(ArithmeticError):
    """A simulated or forecast trajectory left the admissible range."""


class DegenerateMatrixError(ValueError):
    """A random reservoir draw has (numerically) zero spectral radius."""


class SingularSystemError(ArithmeticError):
    """The regularized normal equations could not be factorized."""


class InsufficientDataError(ValueError):
    """Too few samples to train after washout."""


class AllCandidatesDivergedError(RuntimeError):
    """Every candidate (or seed) in a selection sweep diverged."""
