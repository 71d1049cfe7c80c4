"""Exception hierarchy shared across the package.

The CLI maps these onto stable exit codes (see ``ecgssl.cli``).
"""


class EcgSslError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(EcgSslError, ValueError):
    """Invalid parameters, unmet sampler requirements, bad band edges."""


class DataError(EcgSslError, ValueError):
    """Malformed or non-finite input data."""


class ShapeError(EcgSslError, ValueError):
    """Operand shapes are incompatible."""


class NumericError(EcgSslError, ArithmeticError):
    """A quantity is undefined, e.g. cosine similarity of a zero vector."""


class TrainingError(EcgSslError, RuntimeError):
    """Training diverged or produced a non-finite update."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class FoldError(EcgSslError, RuntimeError):
    """A cross-validation fold failed; carries the fold index."""

    def __init__(self, fold, cause):
        super().__init__(f"fold {fold}: {type(cause).__name__}: {cause}")
        self.fold = fold
        self.cause = cause

    def __reduce__(self):  # keep picklable across worker processes
        return (FoldError, (self.fold, self.cause))
