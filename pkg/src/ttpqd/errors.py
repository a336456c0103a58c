"""Exception hierarchy for ttpqd."""

from __future__ import annotations


class TtpError(Exception):
    """Base class for every error raised by ttpqd."""


class InstanceFormatError(TtpError, ValueError):
    """A benchmark file could not be turned into a valid instance."""


class MalformedHeader(InstanceFormatError):
    """A header key is missing, duplicated or carries an unusable value."""


class CountMismatch(InstanceFormatError):
    """A section holds a different number of lines than its header declares."""


class InvalidItemCity(InstanceFormatError):
    """An item is assigned to city 1 or to a city outside the instance."""


class NonIntegerWeight(InstanceFormatError):
    """An item weight is not a non-negative integer."""


class IndexOutOfRange(TtpError, IndexError):
    """A city index lies outside [1, n]."""


class InvalidTour(TtpError, ValueError):
    """A sequence is not a permutation of the instance's cities."""


class InfeasiblePacking(TtpError, ValueError):
    """A packing list exceeds the knapsack capacity."""


class InvalidGridSpec(TtpError, ValueError):
    """Archive thresholds or cell counts are out of range."""


class EmptyPopulation(TtpError, ValueError):
    """An operation needing at least one solution received none."""


class SnapshotError(TtpError, ValueError):
    """A map snapshot failed schema validation or archive invariants."""


class InvalidConfig(TtpError, ValueError):
    """A solver or experiment configuration is inconsistent."""


class GridUnreachable(TtpError):
    """The initial population filled no cell of the archive."""


class ExperimentFailed(TtpError):
    """A run aborted an experiment; partial results were written to the manifest."""

    def __init__(self, message: str, manifest_path=None):
        super().__init__(message)
        self.manifest_path = manifest_path
