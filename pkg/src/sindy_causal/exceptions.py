"""Exception and warning types raised across the package."""


class SindyCausalError(Exception):
    """Base class for all package errors."""


class InputError(SindyCausalError, ValueError):
    """Malformed or non-finite input."""


class SizeError(SindyCausalError, ValueError):
    """Array dimensions violate an operation's size requirements."""


class DomainError(SindyCausalError, ValueError):
    """A function was evaluated outside its domain."""


class PreconditionError(SindyCausalError, ValueError):
    """An operation was called in a state it does not accept."""


class ConflictError(SindyCausalError, ValueError):
    """Duplicate identifiers."""


class IntegrationError(SindyCausalError, ArithmeticError):
    """A Runge-Kutta stage produced a non-finite value."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SimulationError(SindyCausalError, ArithmeticError):
    """A simulated trajectory left the finite region."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConvergenceError(SindyCausalError, RuntimeError):
    """An iterative method did not converge."""


class DegenerateTestError(SindyCausalError, ValueError):
    """A test statistic is undefined (e.g. zero-variance residuals)."""


class ConvergenceWarning(UserWarning):
    """An iterative method stopped at its iteration cap."""
