"""Exception hierarchy shared across the package."""

from __future__ import annotations


class VectileError(Exception):
    """Base class for all vectile errors."""


class ZoomRangeError(VectileError):
    """Zoom level outside the supported pyramid."""


class GeometryParseError(VectileError):
    """Malformed input geometry; carries the offending record location."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"{message} (record {line})"
        super().__init__(message)


class DuplicateDatasetError(VectileError):
    """A dataset with the same name is already registered."""


class UnknownDatasetError(VectileError):
    """Requested dataset has not been registered."""


class IndexFormatError(VectileError):
    """Index file is unreadable: bad magic, version, truncation or checksum."""


class PatternNotFoundError(VectileError):
    """fill_mode=pattern referenced a pattern id missing from the library."""


class TaskQueueFullError(VectileError):
    """Bounded task pool rejected a new tile task (backpressure)."""
