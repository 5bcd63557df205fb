"""Small numeric helpers: exact rationals from user input, guarded ceilings."""

from __future__ import annotations

import math
from fractions import Fraction

# Denominator cap used when snapping a float onto a nearby rational.
# 1/144 as a double snaps back to exactly 1/144.
_MAX_DENOMINATOR = 10**12

CEIL_GUARD = 1e-9


def as_fraction(x) -> Fraction:
    """Convert ints, floats, Fractions or strings like ``"1/144"`` to a Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(x).limit_denominator(_MAX_DENOMINATOR)
    raise TypeError(f"cannot interpret {x!r} as a number")


def as_float(x) -> float:
    if isinstance(x, str):
        return float(Fraction(x.strip()))
    return float(x)


def ceil_guarded(x: float) -> int:
    """Ceiling that ignores representation error just above an integer."""
    return math.ceil(x - CEIL_GUARD)
