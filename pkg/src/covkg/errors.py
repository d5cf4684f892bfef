"""Exception types shared across the toolkit."""


class CovkgError(Exception):
    """Base class for all toolkit errors."""


class DataError(CovkgError):
    """Malformed or inconsistent input data (bad records, bad files)."""


class GraphError(DataError):
    """Violation of a graph constraint (signature, weight range, missing endpoint)."""


class StageError(DataError):
    """A pipeline stage cannot run because an upstream artifact is missing."""

    def __init__(self, message: str, required_stage: str | None = None):
        super().__init__(message)
        self.required_stage = required_stage
