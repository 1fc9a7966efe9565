"""Exception types shared across the package."""

from __future__ import annotations


class ObciError(Exception):
    """Base class for errors raised by this package."""


class DegenerateEstimateError(ObciError):
    """A functional estimator is undefined on the window it was given.

    Carries the paper-table "NA" semantics: coverage harnesses count these,
    they are never encoded as sentinel numbers.
    """

    def __init__(self, message: str, batch_index: int | None = None):
        super().__init__(message)
        self.batch_index = batch_index


class DegenerateIntervalError(ObciError):
    """An interval cannot be formed (zero variance estimate, too few roots)."""


class AllDegenerateError(ObciError):
    """Every replication of an experiment was degenerate."""


class DataFormatError(ObciError):
    """A dataset file failed to parse."""

    def __init__(self, message: str, line_number: int | None = None):
        super().__init__(message)
        self.line_number = line_number
