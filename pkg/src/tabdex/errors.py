"""Exception types shared across the index pipeline."""

from __future__ import annotations


class TabdexError(Exception):
    """Base class for all tabdex errors."""


class RepositoryFormatError(TabdexError):
    """A repository file failed validation.

    Carries the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateTableError(TabdexError):
    """A table id was inserted twice."""


class UnknownTableError(TabdexError):
    """A table id is not present in the index."""
