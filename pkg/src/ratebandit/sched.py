"""Phase bookkeeping for the phased UCB policy.

Phase l lasts T_l = 2**(l+2) slots and offers d_l = ceil(C * T_l**(1/2 - delta))
equally spaced rates.  Phase l occupies slots T_l^sum + 1 .. T_l^sum + T_l with
T_l^sum = 2**(l+2) - 8.
"""

from __future__ import annotations

from dataclasses import dataclass

from ratebandit._num import ceil_guarded
from ratebandit.errors import DomainError

MAX_PHASE = 60


def phase_length(l: int) -> int:
    if l < 1 or l > MAX_PHASE:
        raise DomainError(f"phase index must lie in [1, {MAX_PHASE}]")
    return 1 << (l + 2)


def phase_start(l: int) -> int:
    """T_l^sum: the last slot of phase l - 1 (0 for the first phase)."""
    if l < 1 or l > MAX_PHASE + 1:
        raise DomainError(f"phase index must lie in [1, {MAX_PHASE + 1}]")
    return (1 << (l + 2)) - 8


@dataclass(frozen=True)
class PhaseSchedule:
    C: float
    delta: float

    def __post_init__(self):
        if not 0.0 < self.C < 1.0:
            raise DomainError("C must lie in (0, 1)")
        if not 0.0 < self.delta < 0.5:
            raise DomainError("delta must lie in (0, 1/2)")

    def grid_size(self, l: int) -> int:
        phase_length(l)
        x = self.C * 2.0 ** ((l + 2) * (0.5 - self.delta))
        return max(1, ceil_guarded(x))

    def phase_of(self, t: int) -> tuple[int, int]:
        """Phase l containing slot t and the position u of t within it (1-based)."""
        if t < 1:
            raise DomainError("slots are numbered from 1")
        l = (t + 7).bit_length() - 3
        return l, t - phase_start(l)

    def first_stable_phase(self, epsilon: float, gamma: float) -> tuple[int, int]:
        """Smallest l with d_l >= gamma/epsilon, and T_l^sum for that l."""
        if not 0.0 < epsilon <= 1.0:
            raise DomainError("epsilon must lie in (0, 1]")
        if not gamma > 1.0:
            raise DomainError("gamma must exceed 1")
        target = gamma / epsilon
        for l in range(1, MAX_PHASE + 1):
            if self.grid_size(l) >= target * (1.0 - 1e-12):
                return l, phase_start(l)
        raise DomainError("grid never reaches gamma/epsilon within the supported phases")


def grid_size(l: int, sched: PhaseSchedule) -> int:
    return sched.grid_size(l)


def phase_of(t: int, sched: PhaseSchedule) -> tuple[int, int]:
    return sched.phase_of(t)


def first_stable_phase(epsilon: float, gamma: float, sched: PhaseSchedule) -> tuple[int, int]:
    return sched.first_stable_phase(epsilon, gamma)
