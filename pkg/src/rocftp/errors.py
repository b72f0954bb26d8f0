"""Exception types shared across the package."""


class RocftpError(Exception):
    """Base class for package errors."""


class ReadOnceViolationError(RocftpError):
    """The read-once randomness contract was broken (reseed/rewind/fork)."""


class CapExceededError(RocftpError):
    """A safety cap was hit before the run could finish."""


class NonCoalescenceError(CapExceededError):
    """Coalescence was not reached within the configured cap."""
