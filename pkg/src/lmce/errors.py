"""Exception hierarchy.

Validation problems (bad input data) and numerical failures (infeasible
market, excessive degeneracy, straddled breakpoints) are kept apart so the
command line can map them to different exit codes.
"""


class CarbonError(Exception):
    """Base class for all errors raised by this package."""


class CaseValidationError(CarbonError, ValueError):
    """Case data is malformed or violates a grid-model invariant."""


class NumericalError(CarbonError, RuntimeError):
    """A numerical routine could not produce a trustworthy result."""


class InfeasibleError(NumericalError):
    """The clearing LP has no feasible point."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class UnboundedError(NumericalError):
    pass


class KktConsistencyError(NumericalError):
    """The supplied solution does not satisfy the KKT conditions."""


class BreakpointStraddleError(NumericalError):
    """A finite-difference stencil crossed a change of the binding set."""


class DegeneracyError(NumericalError):
    """Too many critical-region changes along the load ray."""
