"""Exception hierarchy shared across the package.

Every error carries a stable machine-readable ``code`` so the HTTP layer and
the CLI can surface it without string matching.
"""

from __future__ import annotations


class LitloopError(Exception):
    """Base class for all domain errors."""

    code = "litloop_error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


class MalformedDoi(LitloopError):
    code = "malformed_doi"


class EmptyTitle(LitloopError):
    code = "empty_title"


class InvalidInterest(LitloopError):
    code = "invalid_interest"


class UnknownConnector(LitloopError):
    code = "unknown_connector"


class AllConnectorsFailed(LitloopError):
    code = "all_connectors_failed"


class UnmappablePayload(LitloopError):
    code = "unmappable_payload"


class ProviderUnavailable(LitloopError):
    code = "provider_unavailable"


class MalformedResponse(LitloopError):
    code = "malformed_response"


class BudgetExceeded(LitloopError):
    code = "budget_exceeded"


class EmptyCorpus(LitloopError):
    code = "empty_corpus"


class NotADirectory(LitloopError):
    code = "not_a_directory"


class EmptyDirectory(LitloopError):
    code = "empty_directory"


class IoFailure(LitloopError):
    code = "io_failure"


class NoDocument(LitloopError):
    code = "no_document"


class ExtractionFailed(LitloopError):
    code = "extraction_failed"


class DuplicateProperty(LitloopError):
    code = "duplicate_property"


class EmptyModel(LitloopError):
    code = "empty_model"


class TargetValidated(LitloopError):
    code = "target_validated"


class UnknownTarget(LitloopError):
    code = "unknown_target"


class CellValidated(LitloopError):
    code = "cell_validated"


class UnknownCell(LitloopError):
    code = "unknown_cell"


class UnknownRow(LitloopError):
    code = "unknown_row"


class SchemaViolation(LitloopError):
    code = "schema_violation"

    def __init__(self, message: str = "", path: str = ""):
        super().__init__(message)
        self.path = path


class IllegalTransition(LitloopError):
    code = "illegal_transition"


class UnknownResource(LitloopError):
    code = "unknown_resource"
