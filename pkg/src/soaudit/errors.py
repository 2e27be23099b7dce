"""Exception hierarchy shared across the audit engine."""


class AuditError(Exception):
    """Base class for all engine errors."""


class EmptyInput(AuditError):
    """Raised when tokenization produces no tokens."""


class LengthMismatch(AuditError):
    """Raised when comparing sentences of different lengths."""


class NotInPatchDomain(AuditError):
    """Sentence does not contain the first patch word exactly once."""


class NoApplicablePatch(AuditError):
    """No patch pair in the lexicon applies to the input sentence."""


class BudgetRequired(AuditError):
    """Neighborhood distance exceeds the enumeration cap and no sample budget was given."""


class EmptyNeighborhood(AuditError):
    """Bias estimation found no sentences to average over."""


class OracleUnavailable(AuditError):
    """A remote oracle stayed unreachable after all retries."""


class ProtocolError(AuditError):
    """A remote oracle answered with a malformed or out-of-contract response."""


class ParseError(AuditError):
    """An input file could not be parsed; message carries path and line number."""


class LabelError(AuditError):
    """A dataset label is outside {0, 1}."""


class SelfPairError(AuditError):
    """A pair file row has identical first and second word."""


class ConfigError(AuditError):
    """A run was configured with contradictory or unknown settings."""
