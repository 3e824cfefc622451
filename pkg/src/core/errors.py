"""
Error categories for MSGC.

Every error carries a stable ``category`` string; the CLI prints it on a single
line so callers can dispatch on it without parsing prose.
"""

from core.config import EXIT_CODES


class MsgcError(Exception):
    """Base class for all errors raised by this package."""

    category = "error"
    family = "config"

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.family]


class ConfigurationError(MsgcError, ValueError):
    """Shape mismatch or invalid configuration value."""

    category = "config"


class UnknownConfigKeyError(ConfigurationError):
    """RunConfig file contains a key that is not recognised."""

    category = "config_unknown_key"

    def __init__(self, key: str, line_number: int):
        self.key = key
        self.line_number = line_number
        super().__init__(f"unknown config key '{key}' (line {line_number})")


class BadMagicError(MsgcError):
    category = "bad_magic"
    family = "format"


class TruncatedFileError(MsgcError):
    category = "truncated"
    family = "format"


class FormatError(MsgcError):
    """Structurally invalid file (version, trailing bytes, bad table)."""

    category = "format"
    family = "format"


class ChecksumError(MsgcError):
    category = "crc_mismatch"
    family = "format"


class LabelRangeError(MsgcError):
    category = "label_range"
    family = "format"


class CheckpointMismatchError(MsgcError):
    """Checkpoint tensors do not fit the network built from its config."""

    category = "checkpoint_mismatch"
    family = "config"


class NonFiniteError(MsgcError):
    category = "non_finite"
    family = "numeric"


class GradcheckFailure(MsgcError):
    """Analytic gradients disagree with finite differences."""

    category = "gradcheck_failed"
    family = "gradcheck"

    def __init__(self, offenders):
        self.offenders = dict(offenders)
        listing = ", ".join(f"{name}={err:.3e}" for name, err in self.offenders.items())
        super().__init__(f"relative error above tolerance in: {listing}")


class AnalysisError(MsgcError):
    category = "analysis"
    family = "analysis"


class EmptyBatchError(MsgcError):
    """Reduction over a batch with no samples."""

    category = "empty_batch"
    family = "numeric"
