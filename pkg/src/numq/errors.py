class NumqError(Exception):
    """Base class for every error raised by numq."""


class SchemaError(NumqError):
    """Input file header or encoding does not match the expected schema."""


class EmptyDatasetError(NumqError):
    """Ingestion produced zero valid rows."""


class DatasetError(NumqError):
    """A dataset violates structural invariants and cannot be evaluated."""


class ConfigError(NumqError):
    """Configuration document is invalid. ``location`` names the offending key."""

    def __init__(self, message: str, location: str = "") -> None:
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class InjectionError(NumqError):
    """An antipattern spec cannot be applied to the given dataset."""


class NotEvaluableError(NumqError):
    """A detector has no applicable mode for the given input."""


class EvaluationError(NumqError):
    """No dimension could be evaluated for any parameter."""


class LedgerError(NumqError):
    """The decision ledger could not be read or written."""
