"""Exception hierarchy shared by all pcokey modules."""


class PCOError(Exception):
    """Base class for every error raised by pcokey."""


class DomainError(PCOError, ValueError):
    """An argument lies outside the domain of a map."""


class ConfigError(PCOError, ValueError):
    """Invalid model or experiment configuration.

    ``path`` names the offending field (dotted) when known.
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ConvergenceError(PCOError, RuntimeError):
    """An iterative solver failed to bracket or converge."""


class NumericError(PCOError, ArithmeticError):
    """A numerically estimated quantity violates a structural guarantee."""


class NonSyncError(PCOError, ValueError):
    """The initial phase difference sits on the repelling fixed point."""


class SizeError(PCOError, ValueError):
    """Exhaustive enumeration requested beyond its supported size."""


class ProtocolError(PCOError, ValueError):
    """Reconciliation messages are inconsistent with the protocol."""


class HypothesisError(PCOError, ValueError):
    """A guarantee's precondition does not hold for the given configuration."""
