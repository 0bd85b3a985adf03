"""Exception hierarchy shared across the package."""


class ExplauditError(Exception):
    """Base class for all package errors."""


class ConformanceError(ExplauditError):
    """Instance does not conform to the feature space (arity or domain)."""


class UnsupportedDomainError(ExplauditError):
    """Operation requires finitely enumerable domains (e.g. no real intervals)."""


class CapacityError(ExplauditError):
    """Space too large for an exhaustive/tabulation oracle."""


class MalformedExplanationError(ExplauditError):
    """Explanation references a feature unknown to the governing space."""


class DegenerateRateError(ExplauditError):
    """Rate of exactly 0 or 1 makes the query-count formula meaningless."""


class DataFormatError(ExplauditError):
    """Input file or stream does not match the expected layout."""


class ProtocolError(ExplauditError):
    """Remote service reply violates the wire contract (hard incoherence)."""


class RateLimitedError(ExplauditError):
    """Request rejected by the server's rate limiter."""

    def __init__(self, message: str, retry_after: float | None = None):
        super().__init__(message)
        self.retry_after = retry_after
