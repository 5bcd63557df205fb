"""Rate adaptation over a single queue with ACK/NACK feedback."""

from ratebandit.errors import ConfigError, ContractViolation, DomainError, InvariantViolation

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ContractViolation",
    "DomainError",
    "InvariantViolation",
    "__version__",
]
