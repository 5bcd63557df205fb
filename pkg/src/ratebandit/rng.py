"""Counter-based uniforms keyed by (seed, slot, draw index).

Slot t uses the stream positions 2(t-1) (arrival) and 2(t-1)+1 (capacity) of a
Philox generator keyed by the seed, so any block of slots can be regenerated
on its own and replication order never perturbs the draws.
"""

from __future__ import annotations

import numpy as np

DRAWS_PER_SLOT = 2
ARRIVAL, CAPACITY = 0, 1


def slot_uniforms(seed: int, t_start: int, n: int) -> np.ndarray:
    """Uniforms in [0, 1) for slots t_start .. t_start + n - 1, shape (n, 2)."""
    if t_start < 1 or n < 0:
        raise ValueError("slots start at 1")
    pos = DRAWS_PER_SLOT * (t_start - 1)
    bg = np.random.Philox(key=int(seed) % (1 << 64))
    # Philox emits 4 words per counter step
    bg.advance(pos // 4)
    gen = np.random.Generator(bg)
    if pos % 4:
        gen.random(pos % 4)
    return gen.random(DRAWS_PER_SLOT * n).reshape(n, DRAWS_PER_SLOT)


def uniform_at(seed: int, t: int, draw: int) -> float:
    return float(slot_uniforms(seed, t, 1)[0, draw])
