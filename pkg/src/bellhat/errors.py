"""Exception types shared across the package."""


class BellhatError(Exception):
    """Base class for all package errors."""


class DomainError(BellhatError, ValueError):
    """An assignment, subset, or distribution refers to the wrong domain."""


class ValidationError(BellhatError, ValueError):
    """A value violates a structural invariant (weights, normalization, schema)."""


class CapacityError(BellhatError, ValueError):
    """A size guard was exceeded (scenario too large to enumerate)."""


class ConfigError(BellhatError, ValueError):
    """A simulation or sampler configuration is inconsistent."""


class ContractError(BellhatError, RuntimeError):
    """A precondition was violated; carries the witness when one exists."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ProtocolError(BellhatError, RuntimeError):
    """A harness peer broke the wire protocol."""


class HarnessAbort(BellhatError, RuntimeError):
    """A harness run was aborted; carries partial results and error records."""

    def __init__(self, message, partial=None, errors=()):
        super().__init__(message)
        self.partial = partial
        self.errors = list(errors)
