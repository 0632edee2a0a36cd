"""Exception types raised by asyncnet.

Every error carries a short stable name (``kind``) so the CLI can report
which failure occurred without parsing messages.
"""


class AsyncNetError(Exception):
    kind = "asyncnet error"

    def __init__(self, message=None):
        super().__init__(f"{self.kind}: {message}" if message else self.kind)


class EmptyNetworkError(AsyncNetError, ValueError):
    kind = "empty network"


class UnconnectedTopologyError(AsyncNetError, ValueError):
    kind = "unconnected topology"


class EnumerationOverflowError(AsyncNetError, ValueError):
    kind = "enumeration overflow"


class NotPrimitiveError(AsyncNetError, ArithmeticError):
    kind = "not primitive / no unique Perron vector"


class MatchingViolatedError(AsyncNetError, ArithmeticError):
    kind = "matching violated"


class SingularMatrixError(AsyncNetError, ArithmeticError):
    kind = "singular H"


class SingularCovarianceError(AsyncNetError, ArithmeticError):
    kind = "singular aggregate covariance"


class DimensionGuardError(AsyncNetError, ValueError):
    kind = "dimension guard exceeded"


class InsufficientIterationsError(AsyncNetError, ValueError):
    kind = "insufficient iterations"


class NumericalDivergenceError(AsyncNetError, ArithmeticError):
    """Raised when a learning curve blows past the divergence ceiling.

    ``curves`` holds whatever per-strategy MSD was computed before the abort
    (NaN after the failing iteration).
    """

    kind = "numerical divergence"

    def __init__(self, message=None, curves=None, iteration=None):
        super().__init__(message)
        self.curves = curves
        self.iteration = iteration


class ConfigParseError(AsyncNetError, ValueError):
    kind = "parse error"


class ConfigValidationError(AsyncNetError, ValueError):
    kind = "validation error"


class UnknownPresetError(AsyncNetError, KeyError):
    kind = "unknown preset"

    def __str__(self):
        return Exception.__str__(self)
