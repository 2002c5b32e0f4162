"""Exception types shared across the package."""


class EaseError(Exception):
    """Base class for all errors raised by this package."""


class IngestError(EaseError):
    """A record in an interaction stream could not be parsed."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class EmptyDatasetError(EaseError):
    """No interactions remain after filtering."""


class VocabMismatchError(EaseError):
    """Two artifacts refer to different item vocabularies."""


class FactorizationError(EaseError):
    """The regularized Gram matrix is not numerically positive definite."""


class ZeroVarianceError(EaseError):
    """An item column has zero variance and cannot be standardized."""


class FormatError(EaseError):
    """A persisted file is malformed or has an unsupported version."""


class DivergenceError(EaseError):
    """Gradient descent diverged (objective increased repeatedly)."""
