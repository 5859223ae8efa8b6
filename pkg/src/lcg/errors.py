"""Exception hierarchy shared across the pipeline.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, NumericError -> 4.
"""


class LcgError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(LcgError):
    """Invalid configuration: bad flag values, out-of-range parameters."""


class DataError(LcgError):
    """Malformed or inconsistent input data (files, records, digests)."""


class NumericError(LcgError):
    """Numerically invalid state: non-finite values, degenerate rows."""


class StageError(LcgError):
    """Wraps a failure inside a named pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
