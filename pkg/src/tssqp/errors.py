"""Exception types shared across the package."""


class TssqpError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(TssqpError):
    """An array argument has the wrong length or shape."""


class EvaluationFailure(TssqpError):
    """A problem oracle produced non-finite values (overflow, domain error)."""


class UnknownProblem(TssqpError):
    """Requested registry name is not a built-in problem."""


class ParseError(TssqpError):
    """A problem file is malformed; the message carries field/line diagnostics."""


class RankDeficientJacobian(TssqpError):
    """sigma_min(J) fell below the rank tolerance."""


class IndefiniteReducedHessian(TssqpError):
    """Z^T H Z is not positive definite."""


class NonPositiveBeta(TssqpError):
    """A tangential stepsize beta <= 0 was supplied."""


class InvalidLineSearchConfig(TssqpError):
    """Line-search parameters violate 0 < lower <= upper, xi in (0,1), rho in (0,1)."""


class EmptyInput(TssqpError):
    """An aggregation was asked to summarize zero rows."""


class ConfigError(TssqpError):
    """Invalid solver or experiment configuration."""
