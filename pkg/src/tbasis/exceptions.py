"""Exception hierarchy shared by every module in the package."""


class TBasisError(Exception):
    """Base class for all package errors."""


class SizeMismatch(TBasisError, ValueError):
    pass


class ShapeMismatch(TBasisError, ValueError):
    pass


class BadPermutation(TBasisError, ValueError):
    pass


class IndexOutOfRange(TBasisError, IndexError):
    pass


class BadConfig(TBasisError, ValueError):
    pass


class UnsupportedBase(BadConfig):
    """Raised when a conv layer is planned with base ``n < K``."""


class NonFinite(TBasisError, FloatingPointError):
    """Raised when synthesis or the objective leaves the finite range."""


class FormatError(TBasisError, ValueError):
    """Malformed DTF1/TBM1 file or network description."""
