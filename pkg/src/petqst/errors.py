"""Exception hierarchy.

Validation problems (bad shapes, out-of-range parameters, malformed files)
derive from :class:`ValidationError`; numerical breakdowns derive from
:class:`NumericalError`. The CLI maps the two families to distinct exit codes.
"""


class TqstError(Exception):
    """Base class for all package errors."""


class ValidationError(TqstError, ValueError):
    pass


class NumericalError(TqstError, ArithmeticError):
    pass


class NonSquare(ValidationError):
    pass


class NonHermitian(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class InvalidSpec(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class AllZero(ValidationError):
    pass


class InconsistentReport(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class EmptyDataset(ValidationError):
    pass


class TooSmall(ValidationError):
    pass


class GraphNotBuilt(ValidationError):
    """Raised when ``backward`` is called before a forward pass was recorded."""


class FormatError(ValidationError):
    """Malformed dataset, checkpoint or record file."""


class NegativeEigenvalue(NumericalError):
    pass


class DegenerateTrace(NumericalError):
    pass


class NonFinite(NumericalError):
    pass


class InvalidState(ValidationError):
    """A matrix that fails the density-matrix invariants."""
