"""Seeded slot-by-slot simulation, replication across seeds, and CSV output."""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ratebandit.dists import Environment
from ratebandit.errors import ConfigError, InvariantViolation
from ratebandit.policy import Policy
from ratebandit.queue import advance, step
from ratebandit.rng import slot_uniforms

BLOCK = 1 << 15


def fmt(x: float) -> str:
    """17 significant digits: enough to round-trip any double."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class SimConfig:
    horizon: int
    seeds: tuple = (0,)
    record_stride: int = 1

    def __post_init__(self):
        if isinstance(self.horizon, bool) or int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError("horizon must be an integer >= 1")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ConfigError("record_stride must be an integer >= 1")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigError("at least one seed is required")
        object.__setattr__(self, "seeds", seeds)
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "record_stride", int(self.record_stride))

    def recorded_slots(self) -> np.ndarray:
        ts = np.arange(self.record_stride, self.horizon + 1, self.record_stride)
        if ts.size == 0 or ts[-1] != self.horizon:
            ts = np.append(ts, self.horizon)
        return ts


@dataclass
class PhaseSegment:
    l: int
    T_l: int
    d_l: int
    start: int
    end: int
    q_sum: float
    counts: tuple = ()

    @property
    def mean_q(self) -> float:
        return self.q_sum / (self.end - self.start + 1)


TRAJECTORY_COLUMNS = ("t", "rate", "ack", "arrival", "capacity", "q", "q_next", "time_avg_q")


@dataclass
class Trajectory:
    """Subsampled per-slot record; running averages are kept at full resolution.

    ``q`` is Q(t) at the start of slot t and ``q_next`` is Q(t+1).
    ``time_avg_q`` is (1/t) * sum_{tau <= t} Q(tau).
    """

    seed: int
    horizon: int
    stride: int
    t: np.ndarray
    rate: np.ndarray
    ack: np.ndarray
    arrival: np.ndarray
    capacity: np.ndarray
    q: np.ndarray
    q_next: np.ndarray
    time_avg_q: np.ndarray
    max_q: float
    q_total: float
    phases: list = field(default_factory=list)

    @property
    def final_time_avg_q(self) -> float:
        return float(self.time_avg_q[-1])

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "H": self.horizon,
            "time_avg_q": self.final_time_avg_q,
            "max_q": self.max_q,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for i in range(len(self.t)):
            buf.write(
                f"{int(self.t[i])},{fmt(self.rate[i])},{int(self.ack[i])},{fmt(self.arrival[i])},"
                f"{fmt(self.capacity[i])},{fmt(self.q[i])},{fmt(self.q_next[i])},{fmt(self.time_avg_q[i])}\n"
            )
        return buf.getvalue()


def run(env: Environment, policy: Policy, config: SimConfig, seed: int) -> Trajectory:
    """Simulate slots 1..H.  Per slot: draw A(t), then C(t), choose, step, observe.

    Output is a pure function of (env, policy state, config, seed).
    """
    H = config.horizon
    stride = config.record_stride
    rec_t = config.recorded_slots()
    n_rec = rec_t.size
    rates = np.empty(n_rec)
    acks = np.empty(n_rec, dtype=bool)
    arrs = np.empty(n_rec)
    caps = np.empty(n_rec)
    qs = np.empty(n_rec)
    qns = np.empty(n_rec)
    avgs = np.empty(n_rec)

    choose, observe = policy.choose, policy.observe
    arrivals_ppf, capacity_ppf = env.arrivals._ppf, env.capacity._ppf

    q = 0.0
    s, c = 0.0, 0.0  # Neumaier-compensated sum of Q(1..t)
    max_q = 0.0
    ri = 0
    next_rec = int(rec_t[0])

    track_phase = policy.phase is not None
    phases: list[PhaseSegment] = []
    cur_phase, phase_start_t, phase_start_sum = None, 1, 0.0

    for start in range(1, H + 1, BLOCK):
        n = min(BLOCK, H - start + 1)
        u = slot_uniforms(seed, start, n)
        a_blk = arrivals_ppf(u[:, 0]).tolist()
        c_blk = capacity_ppf(u[:, 1]).tolist()
        for i in range(n):
            t = start + i
            tt = s + q
            if s >= q:
                c += (s - tt) + q
            else:
                c += (q - tt) + s
            s = tt
            if q > max_q:
                max_q = q

            rate = choose(t)
            if track_phase and policy.phase != cur_phase:
                if cur_phase is not None:
                    phases.append(_segment(policy, cur_phase, phase_start_t, t - 1, s + c - q - phase_start_sum))
                cur_phase, phase_start_t, phase_start_sum = policy.phase, t, s + c - q
            arrival = a_blk[i]
            cap = c_blk[i]
            ack = rate <= cap
            q_next = advance(q, arrival, rate if ack else 0.0)
            observe(t, ack, arrival)

            if t == next_rec:
                rates[ri], acks[ri], arrs[ri], caps[ri] = rate, ack, arrival, cap
                qs[ri], qns[ri], avgs[ri] = q, q_next, (s + c) / t
                ri += 1
                next_rec = int(rec_t[ri]) if ri < n_rec else -1
            if q_next > t:
                raise InvariantViolation(f"Q({t + 1}) = {q_next} exceeds {t}")
            q = q_next

    total = s + c
    if track_phase and cur_phase is not None:
        phases.append(_segment(policy, cur_phase, phase_start_t, H, total - phase_start_sum))
    return Trajectory(seed, H, stride, rec_t, rates, acks, arrs, caps, qs, qns, avgs, max_q, total, phases)


def _segment(policy, l, start, end, q_sum) -> PhaseSegment:
    rec = None
    for r in policy.phase_summaries():
        if r.l == l:
            rec = r
    T_l, d_l, counts = (rec.T_l, rec.d_l, rec.counts) if rec else (0, 0, ())
    return PhaseSegment(l, T_l, d_l, start, end, q_sum, counts)


def replay_rows(trajectory: Trajectory) -> list[int]:
    """Re-apply the queue step to each recorded row; return the slots that disagree.

    With stride 1 consecutive rows must also chain (q_next of t is q of t+1).
    """
    bad = []
    for i in range(len(trajectory.t)):
        out = step(float(trajectory.q[i]), float(trajectory.arrival[i]), float(trajectory.rate[i]), float(trajectory.capacity[i]))
        if out.ack != bool(trajectory.ack[i]) or out.q_next != trajectory.q_next[i]:
            bad.append(int(trajectory.t[i]))
        elif i + 1 < len(trajectory.t) and trajectory.t[i + 1] == trajectory.t[i] + 1:
            if trajectory.q[i + 1] != out.q_next:
                bad.append(int(trajectory.t[i + 1]))
    if len(trajectory.t) and trajectory.t[0] == 1 and trajectory.q[0] != 0.0:
        bad.append(1)
    return bad


def read_trajectory_csv(text: str, seed: int = 0) -> Trajectory:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TRAJECTORY_COLUMNS:
        raise ConfigError(f"not a trajectory CSV: header {rows[0] if rows else None}")
    body = rows[1:]
    col = {name: [r[i] for r in body] for i, name in enumerate(TRAJECTORY_COLUMNS)}
    t = np.array([int(v) for v in col["t"]], dtype=np.int64)
    f = lambda name: np.array([float(v) for v in col[name]])  # noqa: E731
    stride = int(t[1] - t[0]) if len(t) > 1 else 1
    avg = f("time_avg_q")
    return Trajectory(
        seed, int(t[-1]) if len(t) else 0, stride, t, f("rate"),
        np.array([v == "1" for v in col["ack"]]), f("arrival"), f("capacity"),
        f("q"), f("q_next"), avg, float("nan"), float("nan"),
    )


@dataclass
class AggregateResult:
    t: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    seeds: tuple
    per_seed: np.ndarray  # shape (len(seeds), len(t))
    trajectories: list

    @property
    def final_mean(self) -> float:
        return float(self.mean[-1])

    @property
    def final_se(self) -> float:
        return float(self.se[-1])

    def to_csv(self, per_seed: bool = True) -> str:
        buf = io.StringIO()
        head = ["t", "mean_time_avg_q", "se"]
        if per_seed:
            head += [f"seed_{s}" for s in self.seeds]
        buf.write(",".join(head) + "\n")
        for j in range(len(self.t)):
            row = [str(int(self.t[j])), fmt(self.mean[j]), fmt(self.se[j])]
            if per_seed:
                row += [fmt(v) for v in self.per_seed[:, j]]
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def aggregate(trajectories: Sequence[Trajectory]) -> AggregateResult:
    """Seed mean and standard error of the running time-average queue."""
    if not trajectories:
        raise ConfigError("nothing to aggregate")
    per_seed = np.vstack([tr.time_avg_q for tr in trajectories])
    k = per_seed.shape[0]
    mean = per_seed.mean(axis=0)
    se = per_seed.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.zeros_like(mean)
    return AggregateResult(
        trajectories[0].t, mean, se, tuple(tr.seed for tr in trajectories), per_seed, list(trajectories)
    )


def _run_seed(env, policy_factory, config, seed):
    return run(env, policy_factory(), config, seed)


def run_seeds(env: Environment, policy_factory: Callable[[], Policy], config: SimConfig, workers: int = 1) -> list[Trajectory]:
    """One trajectory per seed, in seed order.  ``workers > 1`` fans out over processes,
    so the factory must be picklable (e.g. a ``functools.partial``)."""
    seeds = config.seeds
    if workers <= 1 or len(seeds) == 1:
        return [_run_seed(env, policy_factory, config, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
        futures = [pool.submit(_run_seed, env, policy_factory, config, s) for s in seeds]
        return [f.result() for f in futures]


def replicate(env: Environment, policy_factory: Callable[[], Policy], config: SimConfig, workers: int = 1) -> AggregateResult:
    return aggregate(run_seeds(env, policy_factory, config, workers))
