"""Exception hierarchy shared across the package."""


class EccarError(Exception):
    """Base class for all errors raised by this package."""


class InvalidData(EccarError, ValueError):
    """Input matrices are malformed, non-finite or dimensionally inconsistent."""


class InvalidConfig(EccarError, ValueError):
    pass


class InvalidDimensions(EccarError, ValueError):
    pass


class InvalidPartition(EccarError, ValueError):
    pass


class InvalidModel(EccarError, ValueError):
    pass


class InvalidSignal(EccarError, ValueError):
    """The requested synthetic model does not yield a PSD joint covariance."""


class RankTooLarge(EccarError, ValueError):
    pass


class RankDeficient(EccarError, ValueError):
    pass


class SingularCovariance(EccarError, ValueError):
    pass


class NumericalFailure(EccarError, ArithmeticError):
    """Non-finite values appeared during an iterative solve."""


class DegenerateSolution(EccarError):
    """The penalized estimate carries no usable signal (e.g. B_hat == 0)."""


class NoViableModel(EccarError):
    """Every candidate in a model-selection grid was degenerate."""
