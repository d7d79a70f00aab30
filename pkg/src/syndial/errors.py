"""Exception hierarchy.

Backend errors map to CLI exit code 2, data errors to exit code 3.
"""

from __future__ import annotations


class SynDialError(Exception):
    pass


# --- backend -----------------------------------------------------------------


class BackendError(SynDialError):
    pass


class BackendUnavailable(BackendError):
    """Transport kept failing after all retries, or the mock has no script entry."""


class MalformedResponse(BackendError):
    pass


class AuthFailure(BackendError):
    pass


# --- data --------------------------------------------------------------------


class DataValidationError(SynDialError):
    pass


class MissingColumn(DataValidationError):
    def __init__(self, column: str, path: str | None = None):
        self.column = column
        where = f" in {path}" if path else ""
        super().__init__(f"missing column {column!r}{where}")


class EmptyNote(DataValidationError):
    def __init__(self, row: int):
        self.row = row
        super().__init__(f"row {row}: empty note text")


class DuplicateId(DataValidationError):
    def __init__(self, row: int, note_id: str):
        self.row = row
        self.note_id = note_id
        super().__init__(f"row {row}: duplicate id {note_id!r}")


class MalformedLine(DataValidationError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"line {line}: {reason}")


# --- metrics -----------------------------------------------------------------


class MetricError(SynDialError):
    pass


class MissingReference(MetricError):
    pass


class TooFewTexts(MetricError):
    pass


class EmptyConceptList(MetricError):
    pass
