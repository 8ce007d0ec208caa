class LcgeomError(Exception):
    """Base class for library errors."""


class ConfigError(LcgeomError, ValueError):
    """Malformed experiment configuration or distribution description."""


class MomentNotExistError(LcgeomError, ValueError):
    """Requested moment is infinite for the chosen law."""


class NonConvergenceError(LcgeomError, RuntimeError):
    pass


class CertificateViolation(LcgeomError, RuntimeError):
    """A convex body contradicted its own inner/outer radius certificate."""


class BudgetExhausted(LcgeomError, RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
