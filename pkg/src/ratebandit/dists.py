"""Capacity and arrival laws, the g-function, and the lower-bound environment family.

Every law supports ``tail(r) = P{X >= r}``, ``cdf(x) = P{X <= x}`` and the
generalized inverse ``ppf(u) = inf{x : F(x) >= u}``.  All three accept
scalars or numpy arrays.  Tail probabilities are closed-form per family so
that ``g(r) = r * P{C >= r}`` is exact at atoms (a transmission at V = C
succeeds).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

import numpy as np

from ratebandit._num import as_fraction, as_float
from ratebandit.errors import ConfigError, DomainError

HALF = Fraction(1, 2)
X1 = Fraction(7, 12)
K_THRESHOLD = Fraction(2, 3)
MAX_CONVERSE_EPSILON = Fraction(1, 144)


def _arr(x):
    a = np.asarray(x, dtype=np.float64)
    return a, a.ndim == 0


def _out(a, scalar):
    return float(a) if scalar else a


def _check_unit(a, what="r"):
    if np.any(np.isnan(a)) or np.any(a < 0.0) or np.any(a > 1.0):
        raise DomainError(f"{what} must lie in [0, 1]")


def _check_u(a):
    if np.any(np.isnan(a)) or np.any(a < 0.0) or np.any(a >= 1.0):
        raise DomainError("u must lie in [0, 1)")


class Distribution:
    """Common surface of every law supported on [0, 1]."""

    kind = "abstract"

    def tail(self, r):
        a, scalar = _arr(r)
        _check_unit(a)
        return _out(self._tail(a), scalar)

    def cdf(self, x):
        a, scalar = _arr(x)
        return _out(self._cdf(a), scalar)

    def ppf(self, u):
        a, scalar = _arr(u)
        _check_u(a)
        return _out(self._ppf(a), scalar)

    def g(self, r):
        a, scalar = _arr(r)
        _check_unit(a)
        return _out(a * self._tail(a), scalar)

    def breakpoints(self) -> list[float]:
        """Atoms and jump locations of the law, plus the endpoints 0 and 1."""
        return [0.0, 1.0]

    def maximizer(self) -> tuple[float, float]:
        """Smallest maximizer r* of g over [0, 1] and the value g(r*)."""
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError

    # subclasses implement these on validated float arrays
    def _tail(self, a):
        raise NotImplementedError

    def _cdf(self, a):
        raise NotImplementedError

    def _ppf(self, a):
        raise NotImplementedError


@dataclass(frozen=True)
class PointMass(Distribution):
    value: float
    kind = "point"

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise DomainError("point mass must lie in [0, 1]")

    @property
    def mean(self) -> float:
        return float(self.value)

    def _tail(self, a):
        return np.where(a <= self.value, 1.0, 0.0)

    def _cdf(self, a):
        return np.where(a >= self.value, 1.0, 0.0)

    def _ppf(self, a):
        return np.full_like(a, self.value)

    def breakpoints(self):
        return sorted({0.0, 1.0, float(self.value)})

    def maximizer(self):
        return float(self.value), float(self.value)

    def to_spec(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class Uniform01(Distribution):
    kind = "uniform"

    @property
    def mean(self) -> float:
        return 0.5

    def _tail(self, a):
        return 1.0 - a

    def _cdf(self, a):
        return np.clip(a, 0.0, 1.0)

    def _ppf(self, a):
        return a.copy()

    def maximizer(self):
        return 0.5, 0.25

    def to_spec(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class FiniteSupport(Distribution):
    """A law with finitely many atoms, given as ``((value, prob), ...)``."""

    points: tuple
    kind = "finite"
    _values: np.ndarray = field(init=False, repr=False, compare=False)
    _prefix: np.ndarray = field(init=False, repr=False, compare=False)
    _suffix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        merged: dict[float, float] = {}
        for v, p in self.points:
            v, p = float(v), float(p)
            if not 0.0 <= v <= 1.0:
                raise DomainError(f"support point {v} outside [0, 1]")
            if p < 0.0:
                raise DomainError(f"negative probability {p}")
            merged[v] = merged.get(v, 0.0) + p
        if abs(math.fsum(merged.values()) - 1.0) > 1e-12:
            raise DomainError("probabilities must sum to 1 within 1e-12")
        pts = tuple(sorted((v, p) for v, p in merged.items() if p > 0.0))
        values = [v for v, _ in pts]
        probs = [p for _, p in pts]
        prefix = [0.0] + [math.fsum(probs[: i + 1]) for i in range(len(probs))]
        suffix = [math.fsum(probs[i:]) for i in range(len(probs))] + [0.0]
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "_values", np.array(values))
        object.__setattr__(self, "_prefix", np.array(prefix))
        object.__setattr__(self, "_suffix", np.array(suffix))

    @classmethod
    def from_lists(cls, values, probs) -> "FiniteSupport":
        if len(values) != len(probs):
            raise ConfigError("values and probs differ in length")
        return cls(tuple(zip(values, probs)))

    @property
    def mean(self) -> float:
        return math.fsum(v * p for v, p in self.points)

    def _tail(self, a):
        return self._suffix[np.searchsorted(self._values, a, side="left")]

    def _cdf(self, a):
        return self._prefix[np.searchsorted(self._values, a, side="right")]

    def _ppf(self, a):
        idx = np.searchsorted(self._prefix[1:], a, side="left")
        return self._values[np.minimum(idx, len(self._values) - 1)]

    def breakpoints(self):
        return sorted({0.0, 1.0, *self._values.tolist()})

    def maximizer(self):
        gv = self._values * self._suffix[:-1]
        i = int(np.argmax(gv))
        if gv[i] <= 0.0:
            return 0.0, 0.0
        return float(self._values[i]), float(gv[i])

    def to_spec(self):
        return {
            "kind": self.kind,
            "values": [v for v, _ in self.points],
            "probs": [p for _, p in self.points],
        }


@dataclass(frozen=True)
class Bernoulli(Distribution):
    p: float
    kind = "bernoulli"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError("Bernoulli parameter must lie in [0, 1]")

    @property
    def mean(self) -> float:
        return float(self.p)

    def _tail(self, a):
        return np.where(a <= 0.0, 1.0, self.p)

    def _cdf(self, a):
        return np.where(a < 0.0, 0.0, np.where(a < 1.0, 1.0 - self.p, 1.0))

    def _ppf(self, a):
        if self.p >= 1.0:
            return np.ones_like(a)
        return np.where(a <= 1.0 - self.p, 0.0, 1.0)

    def breakpoints(self):
        return [0.0, 1.0]

    def maximizer(self):
        return (1.0, float(self.p)) if self.p > 0 else (0.0, 0.0)

    def to_spec(self):
        return {"kind": self.kind, "p": self.p}


def converse_points(epsilon, count: int) -> list[Fraction]:
    """Exact x_1..x_count with x_1 = 7/12 and a constant growth ratio."""
    eps = as_fraction(epsilon)
    if not 0 < eps < HALF:
        raise DomainError("epsilon must lie in (0, 1/2)")
    ratio = 1 + 2 * eps / (HALF - eps)
    xs = [X1]
    while len(xs) < count:
        xs.append(xs[-1] * ratio)
    return xs


@dataclass(frozen=True)
class TruncatedReciprocal(Distribution):
    """Environment 0: P{X >= x} = (1/2 - eps)/x above 1/2 - eps, atom at 1.

    No rate earns more than 1/2 - eps, so Bernoulli(1/2) arrivals cannot be
    stabilized.
    """

    epsilon: Fraction
    kind = "truncated-reciprocal"

    def __post_init__(self):
        eps = as_fraction(self.epsilon)
        if not 0 < eps < HALF:
            raise DomainError("epsilon must lie in (0, 1/2)")
        object.__setattr__(self, "epsilon", eps)

    @property
    def floor(self) -> float:
        return float(HALF - self.epsilon)

    @property
    def mean(self) -> float:
        a = self.floor
        return a + a * math.log(1.0 / a)

    def _tail(self, a):
        lo = self.floor
        with np.errstate(divide="ignore"):
            return np.where(a <= lo, 1.0, lo / np.maximum(a, lo))

    def _cdf(self, a):
        lo = self.floor
        with np.errstate(divide="ignore"):
            mid = 1.0 - lo / np.maximum(a, lo)
        return np.where(a <= lo, 0.0, np.where(a < 1.0, mid, 1.0))

    def _ppf(self, a):
        lo = self.floor
        cont = np.minimum(lo / (1.0 - a), 1.0)
        return np.where(a < 1.0 - lo, cont, 1.0)

    def breakpoints(self):
        return [0.0, self.floor, 1.0]

    def maximizer(self):
        # g is flat at 1/2 - eps on [1/2 - eps, 1]; report the left end
        return self.floor, self.floor

    def to_spec(self):
        return {"kind": self.kind, "epsilon": str(self.epsilon)}


@dataclass(frozen=True)
class ConverseEnv(Distribution):
    """Capacity law of lower-bound environment k.

    Agrees with :class:`TruncatedReciprocal` outside the interval
    (x_k, x_{k+1}], where the tail is held at (1/2 - eps)/x_k.  That moves
    the maximum of g to x_{k+1} with value 1/2 + eps.
    """

    epsilon: Fraction
    k: int
    kind = "converse"
    lo_exact: Fraction = field(init=False, repr=False, compare=False)
    hi_exact: Fraction = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        eps = as_fraction(self.epsilon)
        if not 0 < eps < HALF:
            raise DomainError("epsilon must lie in (0, 1/2)")
        if int(self.k) != self.k or self.k < 1:
            raise DomainError("environment index k must be a positive integer")
        xs = converse_points(eps, int(self.k) + 1)
        if xs[-1] >= 1:
            raise DomainError(f"x_{self.k + 1} >= 1: environment {self.k} does not exist for this epsilon")
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "lo_exact", xs[-2])
        object.__setattr__(self, "hi_exact", xs[-1])

    @property
    def floor(self) -> float:
        return float(HALF - self.epsilon)

    @property
    def lo(self) -> float:
        return float(self.lo_exact)

    @property
    def hi(self) -> float:
        return float(self.hi_exact)

    @property
    def mean(self) -> float:
        a, lo, hi = self.floor, self.lo, self.hi
        return a + a * math.log(1.0 / a) - a * (math.log(hi / lo) - (hi - lo) / lo)

    def _tail(self, a):
        floor, lo, hi = self.floor, self.lo, self.hi
        with np.errstate(divide="ignore"):
            recip = floor / np.maximum(a, floor)
        inside = (a > lo) & (a <= hi)
        return np.where(a <= floor, 1.0, np.where(inside, floor / lo, recip))

    def _cdf(self, a):
        floor, lo, hi = self.floor, self.lo, self.hi
        with np.errstate(divide="ignore"):
            recip = 1.0 - floor / np.maximum(a, floor)
        return np.select(
            [a < floor, (a >= lo) & (a < hi), a >= 1.0],
            [0.0, 1.0 - floor / lo, 1.0],
            default=recip,
        )

    def _ppf(self, a):
        floor, lo, hi = self.floor, self.lo, self.hi
        c1 = 1.0 - floor / lo
        c2 = 1.0 - floor / hi
        c3 = 1.0 - floor
        recip = floor / (1.0 - a)
        return np.select(
            [a <= c1, a <= c2, a < c3],
            [np.minimum(recip, lo), hi, np.clip(recip, hi, 1.0)],
            default=1.0,
        )

    def breakpoints(self):
        return [0.0, self.floor, self.lo, self.hi, 1.0]

    def maximizer(self):
        return self.hi, float(HALF + self.epsilon)

    def to_spec(self):
        return {"kind": self.kind, "epsilon": str(self.epsilon), "k": self.k}


CAPACITY_KINDS = (PointMass, Uniform01, FiniteSupport, TruncatedReciprocal, ConverseEnv)
ARRIVAL_KINDS = (Bernoulli, FiniteSupport)


def tail(dist: Distribution, r):
    """P{C >= r}, exact for every closed-form family."""
    return dist.tail(r)


def g(dist: Distribution, r):
    """Expected service when always attempting rate r: r * P{C >= r}."""
    return dist.g(r)


def sample(dist: Distribution, u):
    """Generalized inverse-CDF transform of a uniform variate u in [0, 1)."""
    return dist.ppf(u)


@dataclass(frozen=True)
class ConverseFamily:
    epsilon: Fraction
    x: tuple  # exact x_1 .. x_{K+1}
    K: int

    @property
    def x_float(self) -> list[float]:
        return [float(v) for v in self.x]

    @property
    def intervals(self) -> list[tuple[Fraction, Fraction]]:
        """I_k = (x_k, x_{k+1}] for k = 1..K."""
        return [(self.x[i], self.x[i + 1]) for i in range(self.K)]

    def environment(self, k: int) -> "Environment":
        return converse_environment(self.epsilon, k)


def build_converse_family(epsilon) -> ConverseFamily:
    """Grow x_k geometrically from 7/12 until x_{K+1} >= 2/3."""
    eps = as_fraction(epsilon)
    if not 0 < eps <= MAX_CONVERSE_EPSILON:
        raise DomainError("the converse family is defined for 0 < epsilon <= 1/144")
    ratio = 1 + 2 * eps / (HALF - eps)
    xs = [X1]
    while xs[-1] < K_THRESHOLD:
        xs.append(xs[-1] * ratio)
    return ConverseFamily(epsilon=eps, x=tuple(xs), K=len(xs) - 1)


@dataclass(frozen=True)
class Environment:
    arrivals: Distribution
    capacity: Distribution
    lam: float
    r_star: float
    g_star: float
    slack: float
    name: str = "custom"

    @property
    def stabilizable(self) -> bool:
        return self.slack > 0

    def g(self, r):
        return self.capacity.g(r)

    def to_spec(self) -> dict:
        cap = self.capacity
        if isinstance(cap, ConverseEnv):
            return {"family": "converse", "epsilon": str(cap.epsilon), "k": cap.k}
        if isinstance(cap, TruncatedReciprocal) and self.name == "env0":
            return {"family": "converse", "epsilon": str(cap.epsilon), "k": 0}
        return {"family": "custom", "arrivals": self.arrivals.to_spec(), "capacity": cap.to_spec()}


def custom_environment(arrivals: Distribution, capacity: Distribution, name: str = "custom") -> Environment:
    if not isinstance(arrivals, ARRIVAL_KINDS):
        raise ConfigError(f"unsupported arrival law {type(arrivals).__name__}")
    if not isinstance(capacity, CAPACITY_KINDS):
        raise ConfigError(f"unsupported capacity law {type(capacity).__name__}")
    r_star, g_star = capacity.maximizer()
    lam = arrivals.mean
    return Environment(arrivals, capacity, lam, r_star, g_star, g_star - lam, name)


def converse_environment(epsilon, k: int) -> Environment:
    """Environment k of the lower-bound construction (k = 0 is Environment 0).

    Arrivals are Bernoulli(1/2).  For k >= 1 the slack is exactly epsilon and
    r* = x_{k+1}; for k = 0 the best rate earns 1/2 - epsilon.
    """
    eps = as_fraction(epsilon)
    if k == 0:
        cap = TruncatedReciprocal(eps)
        return Environment(Bernoulli(0.5), cap, 0.5, cap.floor, cap.floor, float(-eps), "env0")
    cap = ConverseEnv(eps, k)
    return Environment(Bernoulli(0.5), cap, 0.5, cap.hi, float(HALF + eps), float(eps), f"converse-{k}")


def env0(epsilon) -> Environment:
    return converse_environment(epsilon, 0)


def _take(spec: Mapping, allowed: set, where: str) -> dict:
    if not isinstance(spec, Mapping):
        raise ConfigError(f"{where}: expected a table, got {type(spec).__name__}")
    unknown = set(spec) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    return dict(spec)


def _need(spec: dict, key: str, where: str):
    if key not in spec:
        raise ConfigError(f"{where}: missing key '{key}'")
    return spec[key]


def make_distribution(spec: Mapping, where: str = "distribution") -> Distribution:
    kind = spec.get("kind") if isinstance(spec, Mapping) else None
    try:
        if kind == "bernoulli":
            s = _take(spec, {"kind", "p"}, where)
            return Bernoulli(as_float(_need(s, "p", where)))
        if kind == "point":
            s = _take(spec, {"kind", "value"}, where)
            return PointMass(as_float(_need(s, "value", where)))
        if kind == "uniform":
            _take(spec, {"kind"}, where)
            return Uniform01()
        if kind == "finite":
            s = _take(spec, {"kind", "values", "probs"}, where)
            values = [as_float(v) for v in _need(s, "values", where)]
            probs = [as_float(p) for p in _need(s, "probs", where)]
            return FiniteSupport.from_lists(values, probs)
        if kind == "truncated-reciprocal":
            s = _take(spec, {"kind", "epsilon"}, where)
            return TruncatedReciprocal(as_fraction(_need(s, "epsilon", where)))
        if kind == "converse":
            s = _take(spec, {"kind", "epsilon", "k"}, where)
            return ConverseEnv(as_fraction(_need(s, "epsilon", where)), int(_need(s, "k", where)))
    except (DomainError, TypeError, ValueError, ZeroDivisionError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from exc
    raise ConfigError(f"{where}: unknown kind {kind!r}")


def make_environment(spec: Mapping) -> Environment:
    """Build an environment from a config table.

    ``{"family": "converse", "epsilon": "1/144", "k": 1}`` (k = 0 gives
    Environment 0), ``{"family": "env0", "epsilon": ...}`` or
    ``{"family": "custom", "arrivals": {...}, "capacity": {...}}``.
    """
    family = spec.get("family") if isinstance(spec, Mapping) else None
    if family == "converse":
        s = _take(spec, {"family", "epsilon", "k"}, "environment")
        eps, k = _need(s, "epsilon", "environment"), _need(s, "k", "environment")
        try:
            eps = as_fraction(eps)
            if isinstance(k, bool) or int(k) != k or k < 0:
                raise ConfigError("environment: k must be a nonnegative integer")
            return converse_environment(eps, int(k))
        except (DomainError, ValueError, ZeroDivisionError, TypeError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"environment: {exc}") from exc
    if family == "env0":
        s = _take(spec, {"family", "epsilon"}, "environment")
        try:
            return env0(as_fraction(_need(s, "epsilon", "environment")))
        except (DomainError, ValueError, ZeroDivisionError, TypeError) as exc:
            raise ConfigError(f"environment: {exc}") from exc
    if family == "custom":
        s = _take(spec, {"family", "arrivals", "capacity"}, "environment")
        arrivals = make_distribution(_need(s, "arrivals", "environment"), "environment.arrivals")
        capacity = make_distribution(_need(s, "capacity", "environment"), "environment.capacity")
        return custom_environment(arrivals, capacity)
    raise ConfigError(f"environment: unknown family {family!r}")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class EnvReport:
    env_name: str
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name, passed, detail=""):
        self.checks.append(CheckResult(name, bool(passed), detail))

    def to_csv(self) -> str:
        lines = ["environment,check,passed,detail"]
        for c in self.checks:
            detail = c.detail.replace('"', "'")
            lines.append(f'{self.env_name},{c.name},{"pass" if c.passed else "FAIL"},"{detail}"')
        return "\n".join(lines) + "\n"


def probe_points(dist: Distribution, grid_step: float) -> np.ndarray:
    """A uniform grid on [0, 1] together with every breakpoint and its float neighbours."""
    n = int(round(1.0 / grid_step))
    pts = [np.linspace(0.0, 1.0, n + 1)]
    extra = []
    for b in dist.breakpoints():
        extra += [b, np.nextafter(b, 0.0), np.nextafter(b, 1.0)]
    pts.append(np.clip(np.array(extra), 0.0, 1.0))
    return np.unique(np.concatenate(pts))


def verify_env(env: Environment, grid_step: float = 1e-5) -> EnvReport:
    """Grid-check the one-sided Lipschitz property, the CDF, and the maximizer of g."""
    if not 0.0 < grid_step <= 1e-3:
        raise DomainError("grid_step must lie in (0, 1e-3]")
    cap = env.capacity
    r = probe_points(cap, grid_step)
    gv = cap.g(r)
    report = EnvReport(env.name)

    F = cap.cdf(r)
    drops = np.diff(F)
    report.add(
        "cdf-monotone",
        bool(np.all(drops >= -1e-15) and F[0] >= 0.0 and F[-1] == 1.0 and cap.tail(0.0) == 1.0),
        f"min increment {drops.min():.3e}",
    )

    # g(r1) - g(r2) <= r1 - r2 for every r2 <= r1  <=>  g(r) - r never rises above its running minimum
    h = gv - r
    excess = float(np.max(h - np.minimum.accumulate(h)))
    report.add("one-sided-lipschitz", excess <= 1e-12, f"max violation {excess:.3e}")

    i = int(np.argmax(gv))
    gmax, rmax = float(gv[i]), float(r[i])
    report.add(
        "a2-maximizer",
        gmax <= env.g_star + 1e-12 and abs(float(cap.g(env.r_star)) - env.g_star) <= 1e-12,
        f"grid max g={gmax!r} at r={rmax!r}; g*={env.g_star!r} at r*={env.r_star!r}",
    )

    if isinstance(cap, ConverseEnv):
        target = float(HALF + cap.epsilon)
        report.add(
            "argmax-at-right-end",
            rmax == cap.hi and abs(gmax - target) <= 1e-12,
            f"argmax {rmax!r} vs x_(k+1) {cap.hi!r}; max {gmax!r} vs {target!r}",
        )
        report.add("slack-equals-epsilon", env.slack == float(cap.epsilon), f"slack {env.slack!r}")
    if isinstance(cap, TruncatedReciprocal):
        target = cap.floor
        report.add(
            "env0-unstabilizable",
            abs(gmax - target) <= 1e-12 and env.slack < 0,
            f"max g {gmax!r} vs 1/2 - eps {target!r}; slack {env.slack!r}",
        )
    return report


def verify_family(epsilon, grid_step: float = 1e-5) -> tuple[ConverseFamily, list[EnvReport]]:
    """Geometry of the converse construction plus ``verify_env`` on environments 0..K."""
    fam = build_converse_family(epsilon)
    eps = fam.epsilon
    geo = EnvReport(f"converse-family(eps={eps})")
    widths = [hi - lo for lo, hi in fam.intervals]
    geo.add("interval-width", all(2 * eps < w < 3 * eps for w in widths),
            f"widths/eps in [{float(min(widths) / eps):.6f}, {float(max(widths) / eps):.6f}]")
    geo.add("intervals-inside", fam.x[0] == X1 and fam.x[-1] < 1,
            f"x_1={fam.x[0]}, x_(K+1)={float(fam.x[-1])!r}")
    geo.add("K-lower-bound", fam.K >= 1 / (36 * eps) and fam.K >= 5,
            f"K={fam.K}, 1/(36 eps)={float(1 / (36 * eps)):.4f}")
    reports = [geo]
    for k in range(fam.K + 1):
        reports.append(verify_env(converse_environment(eps, k), grid_step))
    return fam, reports
