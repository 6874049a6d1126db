"""Exception hierarchy shared by every fairlens module."""


class FairnessError(Exception):
    """Base class for all errors raised by fairlens."""


class IngestError(FairnessError):
    """Raised when a CSV or manifest cannot be turned into a Dataset."""


class ValidationError(IngestError):
    """Raised when ingested counts disagree with the manifest's expectations."""

    def __init__(self, message: str, mismatches: dict | None = None):
        super().__init__(message)
        self.mismatches = mismatches or {}


class EmptyCellError(FairnessError):
    """A conditioning cell has no rows, so a rate is undefined."""


class PreconditionError(FairnessError):
    """Inputs violate an operation's stated precondition."""


class NotApplicableError(FairnessError):
    """The metric needs an input this run does not have (scores, a re-predictable model)."""
