"""Rate-selection policies driven by ACK/NACK feedback.

Every policy follows the same protocol: ``choose(t)`` then ``observe(t, ack,
arrival)`` exactly once per slot, with t counting 1, 2, 3, ...  Policies never
see the queue length or the capacity draw.  Arrivals are passed along for
history-dependent baselines; the two learning policies here ignore them.

All argmaxes break ties toward the lowest arm index.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ratebandit._num import as_fraction, as_float, ceil_guarded
from ratebandit.dists import Environment
from ratebandit.errors import ConfigError, ContractViolation, DomainError
from ratebandit.sched import PhaseSchedule


class Policy:
    name = "policy"
    # phase index for phased policies; None otherwise
    phase = None

    def __init__(self):
        self._t = 1
        self._pending = None

    @property
    def clock(self) -> int:
        return self._t

    def choose(self, t: int) -> float:
        if t != self._t:
            raise ContractViolation(f"choose({t}) called while the policy clock is at {self._t}")
        if self._pending is not None:
            raise ContractViolation(f"choose({t}) called twice without observe")
        rate = self._choose(t)
        self._pending = rate
        return rate

    def observe(self, t: int, ack: bool, arrival: float = 0.0) -> None:
        if self._pending is None:
            raise ContractViolation(f"observe({t}) called before choose")
        if t != self._t:
            raise ContractViolation(f"observe({t}) called while the policy clock is at {self._t}")
        self._observe(t, bool(ack), arrival)
        self._pending = None
        self._t += 1

    def _choose(self, t: int) -> float:
        raise NotImplementedError

    def _observe(self, t: int, ack: bool, arrival: float) -> None:
        pass


@dataclass(frozen=True)
class ArmStats:
    n: int
    mean: float
    ucb: float


@dataclass(frozen=True)
class PhaseRecord:
    l: int
    T_l: int
    d_l: int
    counts: tuple


class PhasedUcbPolicy(Policy):
    """UCB over a uniform rate mesh that is refined at the start of every phase.

    Within phase l the arms are the rates k/d_l, statistics start from zero,
    and the index of arm k is

        mean_k + sqrt((7 - 2 delta) ln(T_l) / (4 max(1, n_k))).

    The log term is fixed within a phase, so only the played arm's index moves;
    a heap keyed by (-index, k) keeps the argmax in O(log d_l).
    """

    name = "phased-ucb"

    def __init__(self, C: float = 0.04, delta: float = 1 / 6):
        super().__init__()
        self.sched = PhaseSchedule(C, delta)
        self.phase = 0
        self.T = 0
        self.d = 0
        self.u = 0
        self.n: list[int] = []
        self.mean: list[float] = []
        self.ucb: list[float] = []
        self.history: list[PhaseRecord] = []
        self._rad2 = 0.0
        self._heap: list = []
        self._arm = -1

    def _start_phase(self, l: int) -> None:
        if self.phase:
            self.history.append(PhaseRecord(self.phase, self.T, self.d, tuple(self.n)))
        self.phase = l
        self.T = 1 << (l + 2)
        self.d = self.sched.grid_size(l)
        self.u = 0
        self._rad2 = (7.0 - 2.0 * self.sched.delta) * math.log(self.T) / 4.0
        init = math.sqrt(self._rad2)
        self.n = [0] * self.d
        self.mean = [0.0] * self.d
        self.ucb = [init] * self.d
        # equal keys in increasing k already satisfy the heap property
        self._heap = [(-init, k) for k in range(self.d)]

    def _choose(self, t: int) -> float:
        if self.u == self.T:
            self._start_phase(self.phase + 1)
        self.u += 1
        k = self._heap[0][1]
        self._arm = k
        return (k + 1) / self.d

    def _observe(self, t: int, ack: bool, arrival: float) -> None:
        k = self._arm
        sample = (k + 1) / self.d if ack else 0.0
        n_prev = self.n[k]
        n = n_prev + 1
        mean = (n_prev * self.mean[k] + sample) / n
        ucb = mean + math.sqrt(self._rad2 / max(1, n))
        self.n[k] = n
        self.mean[k] = mean
        self.ucb[k] = ucb
        heapq.heapreplace(self._heap, (-ucb, k))

    def arm_stats(self) -> list[ArmStats]:
        return [ArmStats(n, m, b) for n, m, b in zip(self.n, self.mean, self.ucb)]

    def phase_summaries(self) -> list[PhaseRecord]:
        """Completed phases plus the current, possibly partial, one."""
        out = list(self.history)
        if self.phase:
            out.append(PhaseRecord(self.phase, self.T, self.d, tuple(self.n)))
        return out


class Ucb1Policy(Policy):
    """UCB1 on the rates k/d: play each arm once, then maximize mean + sqrt(2 ln t / n)."""

    name = "ucb1"

    def __init__(self, d: int):
        super().__init__()
        if int(d) != d or d < 1:
            raise DomainError("d must be a positive integer")
        self.d = int(d)
        self.n = np.zeros(self.d)
        self.total = np.zeros(self.d)
        self.mean = np.zeros(self.d)
        self._arm = -1

    def index(self, t: int) -> np.ndarray:
        return self.mean + np.sqrt(2.0 * math.log(t) / self.n)

    def _choose(self, t: int) -> float:
        if t <= self.d:
            k = t - 1
        else:
            k = int(np.argmax(self.index(t)))
        self._arm = k
        return (k + 1) / self.d

    def _observe(self, t: int, ack: bool, arrival: float) -> None:
        k = self._arm
        if ack:
            self.total[k] += (k + 1) / self.d
        self.n[k] += 1
        self.mean[k] = self.total[k] / self.n[k]

    @property
    def counts(self) -> list[int]:
        return [int(c) for c in self.n]

    def arm_stats(self, t: int | None = None) -> list[ArmStats]:
        t = self._t if t is None else t
        with np.errstate(divide="ignore"):
            idx = self.index(t) if t > 1 else np.full(self.d, np.inf)
        return [ArmStats(int(n), float(m), float(b)) for n, m, b in zip(self.n, self.mean, idx)]


class KnownEpsUcbPolicy(Ucb1Policy):
    """UCB1 on the fixed mesh d = ceil(3/epsilon) when the slack epsilon is known."""

    name = "ucb1-known-eps"

    def __init__(self, epsilon):
        eps = as_fraction(epsilon)
        if not 0 < eps <= 1:
            raise DomainError("epsilon must lie in (0, 1]")
        self.epsilon = eps
        super().__init__(known_eps_grid(eps))


def known_eps_grid(epsilon, gamma=3) -> int:
    """ceil(gamma / epsilon), exact for rational inputs."""
    eps = as_fraction(epsilon)
    return math.ceil(as_fraction(gamma) / eps)


class FixedRatePolicy(Policy):
    name = "fixed"

    def __init__(self, rate: float):
        super().__init__()
        if not 0.0 <= rate <= 1.0:
            raise DomainError("rate must lie in [0, 1]")
        self.rate = float(rate)

    def _choose(self, t):
        return self.rate


class OracleGridPolicy(FixedRatePolicy):
    """Always plays the best rate k*/d on the mesh, found from the true g."""

    name = "oracle-grid"

    def __init__(self, env: Environment, d: int):
        if int(d) != d or d < 1:
            raise DomainError("d must be a positive integer")
        rates = np.arange(1, d + 1) / d
        gv = env.capacity.g(rates)
        self.k_star = int(np.argmax(gv)) + 1
        self.g_best = float(gv[self.k_star - 1])
        super().__init__(self.k_star / d)
        self.d = int(d)


def fixed_rate_policy(r: float) -> FixedRatePolicy:
    return FixedRatePolicy(r)


def oracle_grid_policy(env: Environment, d: int) -> OracleGridPolicy:
    return OracleGridPolicy(env, d)


_POLICY_KEYS = {
    "phased-ucb": {"name", "C", "delta"},
    "ucb1-known-eps": {"name", "epsilon"},
    "ucb1": {"name", "d"},
    "fixed": {"name", "rate"},
    "oracle-grid": {"name", "d", "epsilon"},
}


def make_policy(spec: Mapping, env: Environment | None = None) -> Policy:
    """Instantiate a fresh policy from a config table such as ``{"name": "phased-ucb", "C": 0.04}``."""
    if not isinstance(spec, Mapping):
        raise ConfigError("policy: expected a table")
    name = spec.get("name")
    if name not in _POLICY_KEYS:
        raise ConfigError(f"policy: unknown name {name!r}; choose from {sorted(_POLICY_KEYS)}")
    unknown = set(spec) - _POLICY_KEYS[name]
    if unknown:
        raise ConfigError(f"policy: unknown keys {sorted(unknown)} for {name}")
    try:
        if name == "phased-ucb":
            return PhasedUcbPolicy(as_float(spec.get("C", 0.04)), as_float(spec.get("delta", "1/6")))
        if name == "ucb1-known-eps":
            if "epsilon" not in spec:
                raise ConfigError("policy: ucb1-known-eps needs epsilon")
            return KnownEpsUcbPolicy(spec["epsilon"])
        if name == "ucb1":
            if "d" not in spec:
                raise ConfigError("policy: ucb1 needs d")
            return Ucb1Policy(int(spec["d"]))
        if name == "fixed":
            if "rate" not in spec:
                raise ConfigError("policy: fixed needs rate")
            return FixedRatePolicy(as_float(spec["rate"]))
        if env is None:
            raise ConfigError("policy: oracle-grid needs an environment")
        if "d" in spec:
            d = int(spec["d"])
        elif "epsilon" in spec:
            d = known_eps_grid(spec["epsilon"])
        elif env.slack > 0:
            d = ceil_guarded(3.0 / env.slack)
        else:
            raise ConfigError("policy: oracle-grid needs d or epsilon")
        return OracleGridPolicy(env, d)
    except (DomainError, TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"policy: {exc}") from exc


def phased_choose(policy: PhasedUcbPolicy, t: int) -> float:
    return policy.choose(t)


def phased_observe(policy: PhasedUcbPolicy, t: int, ack: bool) -> None:
    policy.observe(t, ack)


def ucb1_choose(policy: Ucb1Policy, t: int) -> float:
    return policy.choose(t)
