"""Domain exceptions shared across the workbench."""

from __future__ import annotations


class QualdaError(Exception):
    """Base class for all workbench errors."""


# --- corpus ---------------------------------------------------------------

class ParseError(QualdaError):
    def __init__(self, line_no: int, reason: str = "malformed JSON"):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class DuplicateId(QualdaError):
    def __init__(self, doc_id: str):
        super().__init__(f"duplicate doc_id {doc_id!r}")
        self.doc_id = doc_id


class EmptyVocabulary(QualdaError):
    """No word survived stoplist and document-frequency filtering."""


# --- annotation -----------------------------------------------------------

class EmptySelection(QualdaError):
    """Selected span covers only stopped tokens or whitespace."""


class NotFound(QualdaError):
    """Referenced entity (document, code, theme, project, job) does not exist."""


class SelfMerge(QualdaError):
    """Code is already a member of the target theme."""


class LastCode(QualdaError):
    """Cannot split the only code out of a theme."""


# --- engine ---------------------------------------------------------------

class NoTopics(QualdaError):
    """Model would have zero topics (no themes and k_free = 0)."""


class AllForbidden(QualdaError):
    def __init__(self, topic: int):
        super().__init__(f"every word of topic {topic} is forbidden")
        self.topic = topic


class NonFinite(QualdaError):
    """Objective evaluated to NaN or infinity outside forbidden entries."""


class FreeTopicMerge(QualdaError):
    """Only themed topics can be merged."""


class StaleModel(QualdaError):
    """No trained model snapshot has been published yet."""


# --- service --------------------------------------------------------------

class Busy(QualdaError):
    """A training job is already running for this project."""


class Cancelled(QualdaError):
    """Training was cancelled at an iteration boundary."""


class StorageError(QualdaError):
    """Persistence failed; the underlying cause is chained."""


class VersionMismatch(QualdaError):
    def __init__(self, found: int, expected: int):
        super().__init__(f"project schema version {found}, expected {expected}")
        self.found = found
        self.expected = expected
