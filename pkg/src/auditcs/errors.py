"""Exception hierarchy for the audit toolkit.

Every error raised on a user-facing path derives from AuditError so callers
(CLI, HTTP layer) can map failures to exit codes / status codes uniformly.
"""


class AuditError(Exception):
    """Base class for all audit toolkit errors."""

    kind = "error"


class ValidationError(AuditError):
    """Input data violates a documented requirement (bad value, bad range)."""

    kind = "validation"


class FormatError(AuditError):
    """A file or payload is structurally malformed (CSV/JSON shape)."""

    kind = "format"


class ConfigurationError(AuditError):
    """A configuration combination is unusable (e.g. propMS without scores)."""

    kind = "configuration"


class SequencingError(AuditError):
    """An operation was called out of order (observe before draw, etc.)."""

    kind = "sequencing"


class DegenerateDistributionError(AuditError):
    """A sampling distribution has no admissible support left."""

    kind = "degenerate_distribution"


class InvariantViolation(AuditError):
    """An internal invariant failed; indicates a bug or corrupted state."""

    kind = "invariant"
