"""Exception taxonomy shared across the package.

Every recoverable failure surfaces as a typed exception so callers (the
step fallback chain, the CLI) can branch on the class instead of string
matching.
"""


class TrinavError(Exception):
    """Base class for all package errors."""


class InvalidDepthError(TrinavError):
    """Depth sample is non-positive or non-finite (a sensor hole)."""


class NoValidDepthError(TrinavError):
    """No finite depth sample available inside a bounding box."""


class ParseError(TrinavError):
    """Model reply did not match the expected grammar or schema.

    Carries the raw text so retry prompts can quote it.
    """

    def __init__(self, message: str, raw: str = ""):
        super().__init__(message)
        self.raw = raw


class DegenerateBoxError(TrinavError):
    """Bounding box has zero area after clamping to the image."""


class GoalUnreachableError(TrinavError):
    """Goal cell not traversable and no free cell within the search radius."""


class NoPathError(TrinavError):
    """Start cell cannot reach the goal set of a distance field."""


class StaleWaypointError(TrinavError):
    """Backtrack target id was never recorded."""


class BacktrackPolicyError(TrinavError):
    """Backtrack target exists but is forbidden by the active policy."""


class ContractError(TrinavError):
    """Caller violated an interface precondition (e.g. missing view image)."""


class DataError(TrinavError):
    """Persisted inputs are inconsistent (episode/log mismatch, bad file)."""


class ConfigError(TrinavError):
    """Run configuration is unusable (unknown keys, missing credentials)."""


class TransportError(TrinavError):
    """Model endpoint unreachable or persistently failing."""


class AuthError(TransportError):
    """Endpoint rejected the credentials."""


class QuotaError(TransportError):
    """Endpoint rejected the request due to rate/quota limits."""
