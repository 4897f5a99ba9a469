"""Exception types shared across the package."""


class SpiderWalkError(Exception):
    """Base class for all package errors."""


class InvalidConfigurationError(SpiderWalkError, ValueError):
    """Raised when an experiment or walk configuration is malformed."""


class InvalidArgumentError(SpiderWalkError, ValueError):
    """Raised when an operation receives an argument outside its domain."""


class InvalidPolylineError(InvalidArgumentError):
    pass


class ResourceBudgetError(SpiderWalkError, RuntimeError):
    """Raised before any work starts when a computation would exceed its budget."""

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget
