"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the range where an operation is defined."""


class ConfigError(ValueError):
    """A run or environment specification is malformed or inconsistent."""


class ContractViolation(RuntimeError):
    """A policy was driven out of its choose/observe protocol."""


class InvariantViolation(AssertionError):
    """A property that must hold on every trajectory was broken."""
