"""Exception hierarchy shared across the package.

Every deliberate failure raises a subclass of :class:`TacitError`; the HTTP
layer maps subclasses onto status codes by name.
"""

from __future__ import annotations


class TacitError(Exception):
    """Base class for all errors raised on purpose by this package."""


# --- selections ---------------------------------------------------------


class OutOfBounds(TacitError):
    def __init__(self, index: int, axis: str):
        super().__init__(f"index {index} out of bounds on axis {axis!r}")
        self.index = index
        self.axis = axis


class EmptySelection(TacitError):
    """A non-whole-dataset selection carries no indices (or an empty rectangle)."""


# --- ingestion ----------------------------------------------------------


class LimitExceeded(TacitError):
    def __init__(self, axis: str, limit: int):
        super().__init__(f"too many {axis} (limit {limit})")
        self.axis = axis
        self.limit = limit


class RaggedRow(TacitError):
    def __init__(self, row_index: int):
        super().__init__(f"row {row_index} does not match the header width")
        self.row_index = row_index


class DuplicateColumn(TacitError):
    def __init__(self, name: str):
        super().__init__(f"duplicate column name {name!r}")
        self.name = name


class DecodeError(TacitError):
    """Uploaded bytes are not valid UTF-8 text."""


class NonNumericColumn(TacitError):
    pass


class EmptyColumn(TacitError):
    """No non-null values to compute statistics over."""


# --- prompt rendering / parsing ------------------------------------------


class EmptyDataset(TacitError):
    """A prompt or parse step received a dataset with no content."""


class BudgetTooSmall(TacitError):
    """The token budget cannot even hold the dataset header."""


class NoAnnotations(TacitError):
    """The operation needs at least one committed annotation."""


class MalformedOutput(TacitError):
    """Provider output could not be parsed into the requested structure."""


class CountMismatch(MalformedOutput):
    def __init__(self, expected: int, got: int):
        super().__init__(f"expected {expected} questions, got {got}")
        self.expected = expected
        self.got = got


# --- provider boundary ----------------------------------------------------


class ProviderError(TacitError):
    """Completion call failed; the submission is retryable, not rejected."""


class AuthError(ProviderError):
    pass


class ProviderTimeout(ProviderError):
    pass


class RateLimited(ProviderError):
    pass


class TransportError(ProviderError):
    pass


class MalformedProviderOutput(ProviderError):
    """Provider output stayed unparseable after the single repair attempt."""


# --- question lifecycle ----------------------------------------------------


class UnknownQuestion(TacitError):
    def __init__(self, question_id: str):
        super().__init__(f"unknown question {question_id!r}")
        self.question_id = question_id


class NotDisplayed(TacitError):
    def __init__(self, question_id: str):
        super().__init__(f"question {question_id!r} is not on the board")
        self.question_id = question_id


class EmptyAnnotationText(TacitError):
    """Annotations must carry non-empty text."""


# --- persistence ------------------------------------------------------------


class UnknownSession(TacitError):
    def __init__(self, session_id: str):
        super().__init__(f"unknown session {session_id!r}")
        self.session_id = session_id


class SequenceConflict(TacitError):
    def __init__(self, expected: int, got: int):
        super().__init__(f"event sequence conflict: expected {expected}, got {got}")
        self.expected = expected
        self.got = got


class CorruptLog(TacitError):
    def __init__(self, position: int, reason: str = "torn or undecodable record"):
        super().__init__(f"corrupt event log after byte {position}: {reason}")
        self.position = position


class StorageError(TacitError):
    pass


class PreconditionNotMet(TacitError):
    """A gated operation was invoked before its threshold was reached."""
