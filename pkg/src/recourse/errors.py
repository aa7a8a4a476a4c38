"""Exception hierarchy with stable, machine-readable error codes.

Every error raised by the engine carries a ``code`` string that the CLI
surfaces unchanged, so scripts can branch on failure modes without parsing
messages.
"""

from __future__ import annotations


class RecourseError(Exception):
    """Base class for all engine errors."""

    code = "error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class SchemaError(RecourseError):
    """Schema definition or instance/schema mismatch problems."""

    code = "schema"


class DataError(RecourseError):
    """Dataset ingestion problems (missing columns, bad cells, empty files)."""

    code = "data"


class ConfigError(RecourseError):
    """Invalid search or run configuration."""

    code = "config"


class PredictorError(RecourseError):
    """Prediction function failures."""

    code = "predictor"


class ProtocolError(PredictorError):
    """External predictor wire-protocol violations.

    Codes used: ``protocol-handshake``, ``protocol-malformed-line``,
    ``protocol-wrong-length``, ``protocol-nonnumeric-score``,
    ``protocol-unexpected-message``, ``protocol-exit``, ``protocol-timeout``.
    """

    code = "protocol"


class SearchError(RecourseError):
    """Counterfactual search cannot proceed (e.g. no eligible anchor row)."""

    code = "search"


class EmptyResultError(RecourseError):
    """An operation that requires a non-empty counterfactual set got none."""

    code = "empty-result"
