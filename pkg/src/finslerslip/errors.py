"""Exception types shared across the package."""


class MalformedInputError(ValueError):
    """Input data has the wrong shape, sign or coverage."""


class DegenerateInputError(ValueError):
    """Input is well formed but too small to define the requested quantity."""


class InvalidStructureError(ValueError):
    """A norm field or structure violates a positivity requirement."""


class OutOfDomainError(ValueError):
    """A point or path leaves the chart box."""


class PreconditionError(ValueError):
    pass


class ChartMismatchError(ValueError):
    pass


class ApproximationFailedError(RuntimeError):
    """Smoothing could not meet both approximation clauses at the smallest width."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NotInConeError(ValueError):
    """A field failed certification as a nonnegative bounded semi-Lipschitz function.

    ``clauses`` lists every violated clause (``"sign"``, ``"bounded"``,
    ``"slip"``); ``witness`` is a grid point for the first one.
    """

    def __init__(self, clauses, witness, message=""):
        self.clauses = list(clauses)
        self.witness = witness
        super().__init__(message or f"rejected: {', '.join(self.clauses)} at {witness}")
