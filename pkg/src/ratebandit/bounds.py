"""Closed-form queue-size bounds and the small inequalities used to test them.

Every ``log`` is the natural logarithm.  Functions raise DomainError when asked
to evaluate a formula outside the parameter range it was proved for.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ratebandit._num import as_fraction
from ratebandit.dists import build_converse_family
from ratebandit.errors import DomainError

# largest epsilon for which the converse construction is stated
CONVERSE_EPS_MAX = Fraction(1, 144)
KNOWN_EPS_BRANCH = math.exp(-3.0)


def _eps(epsilon) -> float:
    try:
        e = float(epsilon) if not isinstance(epsilon, str) else float(Fraction(epsilon))
    except (TypeError, ValueError) as exc:
        raise DomainError(f"epsilon: {exc}") from exc
    if not (0.0 < e <= 1.0):
        raise DomainError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    return e


def _delta(delta) -> float:
    d = float(delta)
    if not (0.0 < d < 0.5):
        raise DomainError(f"delta must lie in (0, 1/2), got {delta!r}")
    return d


def conjugate(q: float) -> float:
    """p with 1/p + 1/q = 1."""
    if not (1.0 < q < 2.0):
        raise DomainError(f"q must lie in (1, 2), got {q!r}")
    return q / (q - 1.0)


def _pow(base: float, exp: float) -> float:
    """base**exp, saturating to +inf instead of raising on overflow."""
    try:
        return base**exp
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class BoundReport:
    name: str
    parameters: dict
    value: float
    notes: str = ""
    terms: tuple = field(default=())


def theorem1_terms(H, epsilon, C, delta, gamma, q) -> tuple:
    """The five summands of the finite-horizon bound for the phased policy."""
    if int(H) != H or H < 1:
        raise DomainError("H must be a positive integer")
    eps = _eps(epsilon)
    dl = _delta(delta)
    if not (0.0 < C < 1.0):
        raise DomainError(f"C must lie in (0, 1), got {C!r}")
    if not gamma > 1.0:
        raise DomainError(f"gamma must exceed 1, got {gamma!r}")
    p = conjugate(q)
    g1 = gamma - 1.0
    e2 = 2.0 / (1.0 - 2.0 * dl)
    L = math.log(2.0 * H) ** (q + 2.0)
    denom = g1 ** (2 * q) * eps ** (2 * q) * (1.0 - q / 2.0) ** 2
    # t2 overflows a double for delta near 1/2; the bound is then +inf
    t1 = 65.0 * _pow(2.0, 2.0 / (p - 1.0)) * gamma / (g1 * eps)
    t2 = (_pow(2.0, (p + 1.0) / (p - 1.0)) + 2.0) * _pow(gamma / (eps * C), e2)
    t3 = 1.0
    if denom == 0.0:
        return t1, t2, t3, math.inf, math.inf
    t4 = (
        2.0 ** (2.5 * q - dl * q + 3.0) * C**q * gamma ** (2 * q) * (7.0 - 2.0 * dl) ** q
        * L * float(H) ** (1.0 - q / 2.0 - dl * q) / denom
    )
    t5 = 2.0 ** (2 * q + 3.0) * gamma ** (2 * q) * (7.0 - 2.0 * dl) ** q * L * float(H) ** (1.0 - q) / denom
    return t1, t2, t3, t4, t5


def theorem1_finite_bound(H, epsilon, C, delta, gamma, q) -> float:
    return math.fsum(theorem1_terms(H, epsilon, C, delta, gamma, q))


def theorem1_horizon_free(epsilon, C, delta, gamma, q) -> float:
    """Limit of the finite bound as H grows, valid when q > 1/(1/2 + delta)."""
    if not q > 1.0 / (0.5 + _delta(delta)):
        raise DomainError("the H-dependent terms only vanish for q > 1/(1/2 + delta)")
    t = theorem1_terms(1, epsilon, C, delta, gamma, q)
    return math.fsum(t[:3])


def theorem1_limit_bound(delta, epsilon) -> float:
    dl = _delta(delta)
    return 65.0 * 2.0 ** ((2.0 - 4.0 * dl) / (1.0 + 2.0 * dl)) / _eps(epsilon)


def corollary2_bound(epsilon) -> float:
    """Uniform-in-H bound for C = 0.04, delta = 1/6."""
    e = _eps(epsilon)
    return math.fsum([1.0, 267.0 / e, 16846843.0 / e**3, 2675.0 * math.log(1.0 / e) ** 3.5 / e**3])


def corollary2_limit(epsilon) -> float:
    return 130.0 / _eps(epsilon)


def known_eps_bound(epsilon) -> float:
    """Uniform bound for UCB1 on the grid ceil(3/eps).

    The two branches overlap at eps = e^-3; there the larger value is returned.
    """
    e = _eps(epsilon)
    small = 1767.0 * math.log(1.0 / e) / e**2
    large = 12378.0 / e**2
    if e < KNOWN_EPS_BRANCH:
        return small
    if e > KNOWN_EPS_BRANCH:
        return large
    return max(small, large)


def lower_bound(epsilon, proved_only: bool = True) -> float:
    """Worst-case time-average queue size that no policy can beat, 6e-7 / eps^2.

    The statement is proved for eps <= 1/144.  ``proved_only=False`` evaluates
    the same expression outside that range, e.g. to compare curves.
    """
    e = _eps(epsilon)
    if proved_only and as_fraction(epsilon if not isinstance(epsilon, float) else e) > CONVERSE_EPS_MAX:
        raise DomainError("the converse bound is stated for epsilon <= 1/144")
    return 6e-7 / e**2


def converse_horizon(epsilon) -> int:
    """ceil(1/(160 sqrt(7) eps^1.5)^2 + 1) = ceil(1/(179200 eps^3) + 1), exact for rational eps."""
    eps = as_fraction(epsilon)
    if not (0 < eps <= CONVERSE_EPS_MAX):
        raise DomainError("converse_horizon needs 0 < epsilon <= 1/144")
    return math.ceil(1 / (179200 * eps**3) + 1)


def ucb1_pull_bound(gap, H) -> float:
    if not (0.0 < gap <= 1.0):
        raise DomainError(f"gap must lie in (0, 1], got {gap!r}")
    if H < 2:
        raise DomainError("H must be at least 2")
    return 8.0 * math.log(H) / gap**2 + 1.0 + math.pi**2 / 3.0


def kl_bernoulli(a, b) -> float:
    """KL(Bern(a) || Bern(b)) in nats, with 0 ln 0 = 0."""
    if not (0.0 <= a <= 1.0):
        raise DomainError(f"a must lie in [0, 1], got {a!r}")
    if not (0.0 < b < 1.0):
        raise DomainError(f"b must lie in (0, 1), got {b!r}")
    out = 0.0
    if a > 0.0:
        out += a * math.log(a / b)
    if a < 1.0:
        out += (1.0 - a) * math.log((1.0 - a) / (1.0 - b))
    return out


def kl_quadratic_bound(a, b) -> float:
    """(a - b)^2 / (b (1 - b)), an upper bound on kl_bernoulli(a, b)."""
    if not (0.0 < b < 1.0):
        raise DomainError(f"b must lie in (0, 1), got {b!r}")
    return (a - b) ** 2 / (b * (1.0 - b))


def converse_pull_kl(epsilon) -> list[float]:
    """Per-pull KL between neighbouring converse environments on the interval I_k, k = 1..K."""
    fam = build_converse_family(epsilon)
    a = Fraction(1, 2) - fam.epsilon
    # fam.x is 0-based: x_k is fam.x[k - 1]
    return [kl_bernoulli(float(a / hi), float(a / lo)) for lo, hi in fam.intervals]


def check_path_power_bound(path: Sequence[float], p: float = 2.0) -> bool:
    """(sum x^p)^(1/p) <= 2^((p-1)/(2p)) (sum x)^((p+1)/(2p)) for a path from 0 with unit steps."""
    if p < 2:
        raise DomainError("p must be at least 2")
    x = np.asarray(path, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise DomainError("path must be a non-empty sequence")
    if x[0] != 0.0:
        raise DomainError("path must start at 0")
    if np.any(x < 0.0):
        raise DomainError("path entries must be nonnegative")
    if x.size > 1 and np.max(np.abs(np.diff(x))) > 1.0 + 1e-12:
        raise DomainError("successive path entries must differ by at most 1")
    D = math.fsum((x**p).tolist()) ** (1.0 / p)
    S = math.fsum(x.tolist())
    return D <= 2.0 ** ((p - 1.0) / (2.0 * p)) * S ** ((p + 1.0) / (2.0 * p)) + 1e-9


BOUND_COLUMNS = (
    "epsilon",
    "corollary2_bound",
    "corollary2_limit",
    "theorem1_limit_delta_1_6",
    "known_eps_bound",
    "lower_bound",
    "converse_horizon",
)


def bound_row(epsilon) -> dict:
    """All closed-form bounds at one epsilon; converse entries are None where undefined."""
    e = _eps(epsilon)
    in_converse = as_fraction(epsilon) <= CONVERSE_EPS_MAX
    return {
        "epsilon": e,
        "corollary2_bound": corollary2_bound(e),
        "corollary2_limit": corollary2_limit(e),
        "theorem1_limit_delta_1_6": theorem1_limit_bound(1 / 6, e),
        "known_eps_bound": known_eps_bound(e),
        "lower_bound": lower_bound(epsilon) if in_converse else None,
        "converse_horizon": converse_horizon(epsilon) if in_converse else None,
    }


def bound_table(epsilons: Iterable) -> list[dict]:
    eps = list(epsilons)
    if not eps:
        raise DomainError("need at least one epsilon")
    return [bound_row(e) for e in eps]


def theorem1_report(H, epsilon, C, delta, gamma, q) -> BoundReport:
    terms = theorem1_terms(H, epsilon, C, delta, gamma, q)
    return BoundReport(
        "theorem1_finite_bound",
        {"H": H, "epsilon": float(epsilon), "C": C, "delta": delta, "gamma": gamma, "q": q, "p": conjugate(q)},
        math.fsum(terms),
        "valid for delta in (0,1/2), C in (0,1), gamma > 1, q in (1,2), 1/p + 1/q = 1",
        terms,
    )
