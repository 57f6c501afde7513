"""Exception hierarchy shared by every stage of the pipeline."""


class SessionSplitError(Exception):
    """Base class for all errors raised by this package."""


class DataError(SessionSplitError):
    """Input data is missing or unusable. The CLI maps this to exit code 1."""


class FormatError(DataError):
    """A document does not have the expected header or layout."""


class RowError(DataError):
    """A single row could not be parsed."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptySeriesError(DataError):
    pass


class DuplicateEventError(DataError):
    pass


class FetchError(DataError):
    """Transport-level failure while downloading a document."""

    def __init__(self, status, message: str = ""):
        super().__init__(f"fetch failed with status {status}" + (f": {message}" if message else ""))
        self.status = status


class FetchTimeout(DataError, TimeoutError):
    pass


class OfflineError(FetchError):
    def __init__(self):
        super().__init__(None, "network access disabled (offline mode)")


class DomainError(SessionSplitError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateError(SessionSplitError, ArithmeticError):
    """A statistic is undefined for the given input (e.g. zero variance)."""


class InsufficientDataError(DataError):
    pass


class AlignmentError(SessionSplitError, ValueError):
    pass
