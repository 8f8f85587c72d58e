"""Exception taxonomy shared across the package.

Every error carries a stable machine-readable ``code`` so the HTTP layer and
the CLI can map failures without string matching on messages.
"""

from __future__ import annotations


class CoachError(Exception):
    """Base class for all domain errors."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


class ValidationError(CoachError):
    """One or more invariant violations; carries (path, message) pairs."""

    code = "validation"

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        details = "; ".join(f"{path}: {msg}" for path, msg in self.errors)
        super().__init__(f"validation failed: {details}")


class DuplicateId(CoachError):
    code = "duplicate_id"


class UnknownRisk(CoachError):
    code = "unknown_risk"


class UnknownArea(CoachError):
    code = "unknown_area"


class EmptyMessage(CoachError):
    code = "empty_message"


class WrongPhase(CoachError):
    code = "wrong_phase"


class BadSourceRef(CoachError):
    code = "bad_source_ref"


class NoContext(CoachError):
    code = "no_context"


class DuplicateSelection(CoachError):
    code = "duplicate_selection"


class PayloadMismatch(CoachError):
    code = "payload_mismatch"


class ExtractionEmpty(CoachError):
    """No verifiable statements found; non-fatal, caller marks thin context."""

    code = "extraction_empty"


class SchemaError(CoachError):
    """Structured output could not be parsed/validated; keeps raw text for audit."""

    code = "schema_error"

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class BackendError(CoachError):
    """Base for text-generation backend failures."""

    code = "backend_error"

    def __init__(self, message: str = "", task: str = ""):
        super().__init__(message)
        self.task = task


class Timeout(BackendError):
    code = "timeout"


class TransportError(BackendError):
    code = "transport_error"


class BackendRefused(BackendError):
    """Non-2xx backend reply; the body is preserved for audit."""

    code = "backend_refused"

    def __init__(self, message: str = "", status: int = 0, body: str = ""):
        super().__init__(message)
        self.status = status
        self.body = body


class ScriptMismatch(BackendError):
    code = "script_mismatch"


class FixtureParseError(CoachError):
    code = "fixture_parse_error"


class UncoveredTask(BackendError):
    code = "uncovered_task"


class VersionConflict(CoachError):
    code = "version_conflict"

    def __init__(self, message: str = "", current: int | None = None):
        super().__init__(message)
        self.current = current


class NotFound(CoachError):
    code = "not_found"


class IoError(CoachError):
    code = "io_error"


class MigrationRequired(CoachError):
    code = "migration_required"
