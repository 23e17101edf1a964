"""
Exception hierarchy shared by every ringvote package.

The CLI maps these classes onto exit codes (see main.py).
"""

from enum import Enum


class RingVoteError(Exception):
    """Base class for all ringvote errors."""


class ValidationError(RingVoteError, ValueError):
    """Malformed input: off-curve points, bad thresholds, undecodable bytes."""


class ThresholdError(ValidationError):
    """Fewer shares than the reconstruction threshold."""


class CurveError(RingVoteError):
    """Internal curve failure, e.g. hash_to_point ran out of attempts."""


class IntegrityError(RingVoteError):
    """Chain linkage or replay mismatch."""


class RevertCode(str, Enum):
    UNKNOWN_CONTRACT = "UNKNOWN_CONTRACT"
    UNKNOWN_METHOD = "UNKNOWN_METHOD"
    BAD_ARGS = "BAD_ARGS"
    NOT_CONFIGURED = "NOT_CONFIGURED"
    ALREADY_CONFIGURED = "ALREADY_CONFIGURED"
    UNAUTHORIZED = "UNAUTHORIZED"
    REGISTRATION_CLOSED = "REGISTRATION_CLOSED"
    DUPLICATE = "DUPLICATE"
    DUPLICATE_ENDORSEMENT = "DUPLICATE_ENDORSEMENT"
    VOTE_CLOSED = "VOTE_CLOSED"
    BAD_BALLOT = "BAD_BALLOT"
    DOUBLE_VOTE = "DOUBLE_VOTE"
    BAD_SIGNATURE = "BAD_SIGNATURE"
    BAD_CLAIM = "BAD_CLAIM"
    ALREADY_REDEEMED = "ALREADY_REDEEMED"
    WRONG_PHASE = "WRONG_PHASE"
    BAD_EVENT = "BAD_EVENT"
    EARLY_DISCLOSURE = "EARLY_DISCLOSURE"
    KEY_MISMATCH = "KEY_MISMATCH"
    EXECUTION_ERROR = "EXECUTION_ERROR"


class RevertError(RingVoteError):
    """A contract method refused a transaction.

    Args:
        code (str | RevertCode): Stable revert code such as ``DOUBLE_VOTE``.
        message (str): Human readable diagnostic.
    """

    def __init__(self, code: "str | RevertCode", message: str = ""):
        self.code = code.value if isinstance(code, RevertCode) else code
        self.message = message or self.code
        super().__init__(f"{self.code}: {self.message}")
