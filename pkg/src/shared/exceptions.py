"""
Core Custom Exceptions
Application-specific exceptions for better error handling
"""
from typing import Optional


class PairwiseImagingError(Exception):
    """Base exception for the pairwise imaging package"""
    pass


class ShapeMismatchError(PairwiseImagingError):
    """Tensor or operator geometry errors"""
    pass


class TapeError(PairwiseImagingError):
    """Reverse-mode differentiation misuse"""
    pass


class MeasurementError(PairwiseImagingError):
    """Invalid measurement operators or pairs"""
    pass


class SizeLimitError(PairwiseImagingError):
    """Operator too large to materialize as an explicit matrix"""
    pass


class RankDeficientError(PairwiseImagingError):
    """Expected Gram matrix is not full rank"""

    def __init__(self, message: str, null_dim: int, eigenvalues=None):
        super().__init__(message)
        self.null_dim = null_dim
        self.eigenvalues = eigenvalues


class ConfigError(PairwiseImagingError):
    """Configuration validation errors"""
    pass


class DatasetError(PairwiseImagingError):
    """Dataset loading and consistency errors"""
    pass


class CheckpointError(PairwiseImagingError):
    """Tensor container read/write errors"""
    pass


class NumericalFailureError(PairwiseImagingError):
    """Non-finite values during training or verification"""

    def __init__(self, message: str, dump_path: Optional[str] = None):
        super().__init__(message)
        self.dump_path = dump_path


class GradientIsolationError(NumericalFailureError):
    """A stop-gradient contract was violated"""
    pass


# Exit code mapping
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


def exit_code_for(exc: BaseException) -> int:
    """Map a raised exception to the process exit code"""
    if isinstance(exc, (NumericalFailureError, RankDeficientError)):
        return EXIT_NUMERICAL
    return EXIT_USAGE


def describe_error(exc: BaseException) -> str:
    """One-line error message for the command line"""
    if isinstance(exc, RankDeficientError):
        return f"refused: {exc} (null-space dimension {exc.null_dim})"
    if isinstance(exc, NumericalFailureError) and exc.dump_path:
        return f"numerical failure: {exc} (dump written to {exc.dump_path})"
    return f"{type(exc).__name__}: {exc}"
