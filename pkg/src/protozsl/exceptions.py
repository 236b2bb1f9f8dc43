"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when inputs violate a documented precondition or invariant."""


class SingularSystemError(RuntimeError):
    """Raised when a linear system is numerically singular or a solve fails its residual check."""


class MatrixFormatError(ValueError):
    """Raised when a matrix file is malformed (bad magic, truncation, unparseable text)."""


class GenerationError(RuntimeError):
    """Raised when the synthetic data generator cannot satisfy its constraints."""
