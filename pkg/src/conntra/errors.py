"""Exception types shared across the package.

Every failure the library raises deliberately derives from ConntraError so
callers (and the CLI exit-code mapping) can tell our diagnostics apart from
genuine bugs.
"""


class ConntraError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(ConntraError, ValueError):
    """An argument violates a documented precondition."""


class DomainError(ConntraError, ValueError):
    """A value lies outside the finite domain an operation requires."""


class FormatError(ConntraError, ValueError):
    """A file or byte buffer does not match its documented layout."""


class CapacityError(ConntraError, ValueError):
    """A brute-force enumeration was asked to exceed its size guard."""


class NotPositiveDefiniteError(ConntraError, ValueError):
    """A matrix required to be symmetric positive definite is not."""


class InvalidStateError(ConntraError, RuntimeError):
    """A cached structure no longer matches the parameters it mirrors."""


class TrainingDivergedError(ConntraError, RuntimeError):
    """Training produced a non-finite loss; ``epoch`` names where."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch
