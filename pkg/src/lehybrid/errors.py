"""Exception hierarchy shared by the library and the command line."""


class LEHybridError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(LEHybridError, ValueError):
    """An argument lies outside the domain of a function."""


class SchemeError(LEHybridError, ValueError):
    """A censoring scheme is malformed or violates a design rule."""


class DataError(LEHybridError, ValueError):
    """Input data cannot be used (wrong count, ordering, non-positive values)."""


class DegenerateSampleError(DataError):
    """The sample carries too few observed failures for the requested fit."""


class NumericError(LEHybridError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable value."""


class SingularFitError(NumericError):
    """The observed information could not be inverted."""


class ApproximationError(NumericError):
    """Lindley's expansion produced an expectation outside the loss domain."""


class ProposalError(NumericError):
    """The importance-sampling proposal is improper for this sample/prior."""


class UnreliableIntervalError(NumericError):
    """Too few effective draws for a credible interval."""
