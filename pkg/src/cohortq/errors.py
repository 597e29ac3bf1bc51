"""Exception hierarchy shared across the package."""


class CohortError(Exception):
    """Base class for every error this package raises on purpose."""


class DataError(CohortError):
    """Bad input data: malformed rows, key violations, broken store invariants."""


class CsvError(DataError):
    """A CSV row failed to load. Carries the 1-based data row number."""

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class StorageFormatError(DataError):
    """The on-disk chunk store is unreadable or inconsistent."""


class FormatVersionError(StorageFormatError):
    """File was written by an incompatible format version."""


class TruncatedFileError(StorageFormatError):
    """File ends before the declared data does."""


class ChecksumError(StorageFormatError):
    """Stored checksum does not match the bytes read."""


class QueryError(CohortError):
    """User-facing query problem (syntax or validation)."""


class QuerySyntaxError(QueryError):
    """Query text could not be parsed. Carries a character position."""

    def __init__(self, message: str, position: int | None = None):
        if position is not None:
            super().__init__(f"{message} (at position {position})")
        else:
            super().__init__(message)
        self.position = position


class QueryValidationError(QueryError):
    """Query parsed but does not type-check against the schema."""
