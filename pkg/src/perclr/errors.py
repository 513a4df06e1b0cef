"""Shared exception types.

The exit-code contract of the CLI maps onto these: validation problems
(bad inputs, malformed configs) exit 1, invariant violations (a coupling
or estimator contract broken at runtime, which means a bug) exit 2.
"""


class PerclrError(Exception):
    """Base class for all package errors."""


class InvalidInputError(PerclrError, ValueError):
    """An argument violates an operation's precondition."""


class CapacityError(PerclrError):
    """A guard limit was exceeded (box too large, too many optional edges)."""


class NumericError(PerclrError):
    """Numerical routine failed to meet its accuracy contract.

    Carries the partial estimate so callers can inspect it.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class InvariantViolationError(PerclrError):
    """A runtime invariant that must hold pathwise was broken (a bug)."""


class ConfigError(PerclrError):
    """Configuration validation failure; collects per-field diagnostics."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
