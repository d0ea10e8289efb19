"""Exception hierarchy shared by the simulator modules."""


class StratVortexError(Exception):
    """Base class for all errors raised by the package."""


class ConfigurationError(StratVortexError, ValueError):
    pass


class ResolutionError(ConfigurationError):
    pass


class DomainError(StratVortexError, ValueError):
    pass


class InputError(StratVortexError, ValueError):
    pass


class CompatibilityError(StratVortexError, ValueError):
    """Neumann right-hand side has a nonzero mean."""


class ConvergenceError(StratVortexError, RuntimeError):
    pass


class BlowupError(StratVortexError, RuntimeError):
    """Non-finite or runaway fields during integration.

    ``step_index`` is the step that failed; ``last_good`` holds the most
    recent valid snapshot (or state) when one is available.
    """

    def __init__(self, message, step_index=None, last_good=None):
        super().__init__(message)
        self.step_index = step_index
        self.last_good = last_good
