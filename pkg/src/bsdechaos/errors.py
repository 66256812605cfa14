"""Exception hierarchy shared by all modules."""


class BsdeChaosError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgument(BsdeChaosError, ValueError):
    pass


class CapacityError(BsdeChaosError):
    """A backend would exceed its node or particle budget."""

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class InsufficientMoments(BsdeChaosError):
    pass


class NonContraction(BsdeChaosError):
    """Picard differences stopped shrinking although the contraction condition holds."""


class NumericOverflow(BsdeChaosError):
    pass


class ConfigError(BsdeChaosError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationFailure(BsdeChaosError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
