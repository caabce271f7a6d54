"""Error types shared across the package.

Every domain error carries a stable string ``code`` so callers (and the HTTP
service) can match on it without parsing messages.
"""

from __future__ import annotations


class DatdError(Exception):
    """Base class for all domain errors raised by this package."""

    code: str = "error"

    def __init__(self, message: str | None = None):
        super().__init__(message if message is not None else self.code)


class EmptyRoundError(DatdError):
    code = "empty-round"


class DegenerateWeightsError(DatdError):
    code = "degenerate-weights"


class LogDomainError(DatdError):
    code = "log-domain"


class NoTasksError(DatdError):
    code = "no-tasks"


class NoSourcesError(DatdError):
    code = "no-sources"


class InvalidTaskError(DatdError):
    code = "invalid-task"


class PhaseViolationError(DatdError):
    code = "phase-violation"


class DuplicateCommitError(DatdError):
    code = "duplicate-commit"


class DuplicateRevealError(DatdError):
    code = "duplicate-reveal"


class NoCommitmentError(DatdError):
    code = "no-commitment"


class RoundFailedError(DatdError):
    code = "round-failed"


class UndefinedRatioError(DatdError):
    code = "undefined-ratio"


class NoSuchNodeError(DatdError):
    code = "no-such-node"
