"""Exception hierarchy shared across the package."""


class CaadError(Exception):
    """Base class for all errors raised by this package."""


class BuildError(CaadError):
    """Raised when grounding-space construction fails (bad entry, bad corpus, backend failure)."""


class FormatError(CaadError):
    """Raised when a `.caad` file is malformed: bad magic, bad version, truncation, checksum."""


class RetrievalError(CaadError):
    """Raised for invalid retrieval inputs (empty space, zero-norm vectors)."""


class DecodeError(CaadError):
    """Raised when a decode session cannot proceed (id mismatch, backend failure, bad shapes)."""


class BackendError(CaadError):
    """Raised by embedding/logit backends.

    ``retryable`` distinguishes transient transport failures from contract
    violations (schema or dimension mismatch), which are fatal.
    """

    def __init__(self, message, retryable=False):
        super().__init__(message)
        self.retryable = retryable
