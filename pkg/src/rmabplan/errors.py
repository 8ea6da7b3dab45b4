"""Exception types shared across the toolkit.

Each class maps to one CLI exit code (see cli.py): config problems are 2,
solver non-convergence is 3, size-guard trips are 4.
"""


class ContractViolation(ValueError):
    """A precondition or invariant of an operation was violated by the caller."""


class ConfigError(ValueError):
    """A scenario/config document failed to parse or validate."""


class NonConvergence(RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message, residual=None, iterations=None, trace=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
        self.trace = trace


class GuardExceeded(RuntimeError):
    """A problem size exceeded the guard for exact/enumerative computation."""


class IndexabilityInconclusive(RuntimeError):
    """The subsidy grid was too narrow to certify or refute indexability."""
