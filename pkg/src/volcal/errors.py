"""Exception hierarchy for the calibration library."""


class VolcalError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(VolcalError):
    """An argument violates a documented precondition."""


class DomainError(VolcalError):
    """A target domain is not contained in a source domain."""


class NumericalError(VolcalError):
    """A numerical procedure broke down (singular system, NaN, ...)."""


class DataFormatError(VolcalError):
    """Malformed input data (CSV rows, config fields, ...)."""


class NoSelectionError(VolcalError):
    """The discrepancy-principle ladder exhausted its budget.

    Carries the ``trace`` of (alpha, residual) pairs evaluated so far.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []
