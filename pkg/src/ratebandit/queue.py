"""Slotted queue recursion under ACK/NACK feedback.

Q(1) = 0 and Q(t+1) = [Q(t) + A(t) - V(t) 1{V(t) <= C(t)}]_+.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ratebandit.errors import DomainError


@dataclass(frozen=True)
class SlotOutcome:
    ack: bool
    served: float
    arrival: float
    q_next: float


def advance(q: float, arrival: float, served: float) -> float:
    """Unchecked projection step; the simulator and replay share this arithmetic."""
    nxt = q + arrival - served
    return nxt if nxt > 0.0 else 0.0


def _unit(name, x):
    if not (0.0 <= x <= 1.0):
        raise DomainError(f"{name}={x!r} outside [0, 1]")


def step(q: float, arrival: float, rate: float, capacity: float) -> SlotOutcome:
    """One slot: transmit at ``rate``; success iff rate <= capacity (equality succeeds)."""
    if not (q >= 0.0 and math.isfinite(q)):
        raise DomainError(f"queue length {q!r} must be finite and nonnegative")
    _unit("arrival", arrival)
    _unit("rate", rate)
    _unit("capacity", capacity)
    ack = rate <= capacity
    served = rate if ack else 0.0
    return SlotOutcome(ack, served, arrival, advance(q, arrival, served))


@dataclass(frozen=True)
class QueueState:
    q: float = 0.0
    t: int = 1

    def __post_init__(self):
        if self.t < 1 or self.q < 0.0:
            raise DomainError("need t >= 1 and q >= 0")

    def step(self, arrival: float, rate: float, capacity: float) -> tuple["QueueState", SlotOutcome]:
        out = step(self.q, arrival, rate, capacity)
        return QueueState(out.q_next, self.t + 1), out
