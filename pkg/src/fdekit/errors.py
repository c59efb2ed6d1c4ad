"""Exception types shared across the package."""


class FdekitError(Exception):
    """Base class for package errors."""


class NumericDomainError(FdekitError):
    """A numeric evaluation left its valid domain (non-finite values,
    unresolvable quadrature tails, non-convergent iterations)."""


class OutOfRangeError(FdekitError):
    """A history was queried beyond its computed frontier."""


class ContractViolationError(FdekitError):
    """An argument violated a structural precondition (e.g. a matrix
    without the required sign pattern)."""


class PreconditionError(FdekitError):
    """An operation was invoked with inputs outside its stated domain."""


class DegenerateModelError(FdekitError):
    """Model parameters make a defining quantity singular."""


class BoundCollapseError(FdekitError):
    """An iterated lower bound dropped to zero or below; the slack
    parameter is too large for the model."""


class BlowUpError(FdekitError):
    """The integrated state became non-finite in finite time."""

    def __init__(self, time, message=None):
        self.time = time
        super().__init__(message or f"state became non-finite near t = {time:.6g}")


class ConfigError(FdekitError):
    """An experiment configuration failed to parse or validate."""
