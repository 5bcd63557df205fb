"""The acceptance suite: one test per criterion, each printing a single pass/fail line.

Verdict lines are gathered in ``conftest.ACCEPTANCE_LINES`` and repeated in the
terminal summary, so they are visible without ``-s``.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction
from functools import partial
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from ratebandit.bounds import (
    check_path_power_bound,
    converse_horizon,
    converse_pull_kl,
    corollary2_bound,
    corollary2_limit,
    kl_bernoulli,
    kl_quadratic_bound,
    known_eps_bound,
    lower_bound,
    theorem1_limit_bound,
    ucb1_pull_bound,
)
from ratebandit.cli import main
from ratebandit.dists import (
    Bernoulli,
    FiniteSupport,
    PointMass,
    TruncatedReciprocal,
    Uniform01,
    build_converse_family,
    converse_environment,
    custom_environment,
    make_environment,
    probe_points,
)
from ratebandit.policy import KnownEpsUcbPolicy, OracleGridPolicy, PhasedUcbPolicy, Ucb1Policy, known_eps_grid
from ratebandit.queue import step
from ratebandit.sim import SimConfig, run, run_seeds

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def verdict(n: int, checks: dict, start: float, limit: float) -> None:
    """Print and record one line for criterion ``n``, then assert every check and the time budget."""
    elapsed = time.perf_counter() - start
    checks = dict(checks)
    checks[f"runtime {elapsed:.2f}s < {limit:g}s"] = elapsed < limit
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f}s)"
    if failed:
        line += " failed: " + "; ".join(failed)
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_01_converse_exactness():
    start = time.perf_counter()
    eps = Fraction(1, 144)
    fam = build_converse_family(eps)
    checks = {"K == 5": fam.K == 5, "x_2 == 511/852": fam.x[1] == Fraction(511, 852)}
    for k in range(1, fam.K + 1):
        cap = converse_environment(eps, k).capacity
        r = probe_points(cap, 1e-6)
        g = cap.g(r)
        i = int(np.argmax(g))
        checks[f"k={k}: max g = 1/2 + eps ({g[i]!r})"] = abs(g[i] - float(Fraction(1, 2) + eps)) <= 1e-9
        checks[f"k={k}: argmax at x_(k+1)"] = r[i] == float(fam.x[k])
    verdict(1, checks, start, 1.0)


def test_criterion_02_construction_invariants():
    start = time.perf_counter()
    checks = {}
    for eps in (Fraction(1, 144), Fraction(1, 300), Fraction(1, 1000)):
        fam = build_converse_family(eps)
        widths = [hi - lo for lo, hi in fam.intervals]
        checks[f"eps={eps}: 2eps < |I_k| < 3eps"] = all(2 * eps < w < 3 * eps for w in widths)
        checks[f"eps={eps}: K={fam.K} >= 1/(36 eps)"] = fam.K >= 1 / (36 * eps)
        checks[f"eps={eps}: intervals inside [7/12, 1)"] = all(
            Fraction(7, 12) <= lo < hi < 1 for lo, hi in fam.intervals
        )
    verdict(2, checks, start, 1.0)


def test_criterion_03_queue_law():
    start = time.perf_counter()
    rng = np.random.default_rng(20240603)
    # fuzzed single steps: start from a reachable Q(t) <= t - 1 and check Q(t+1) <= t
    fuzz_ok = True
    for _ in range(10_000):
        t = int(rng.integers(1, 1000))
        q = float(rng.uniform(0.0, t - 1))
        out = step(q, float(rng.integers(0, 2) if rng.random() < 0.5 else rng.random()), float(rng.random()), float(rng.random()))
        fuzz_ok &= 0.0 <= out.q_next <= t
    envs = [
        converse_environment(Fraction(1, 144), 1),
        converse_environment(Fraction(1, 16), 1),
        custom_environment(Bernoulli(0.6), Uniform01()),
        custom_environment(FiniteSupport.from_lists([0.0, 1.0], [0.5, 0.5]), FiniteSupport.from_lists([0.3, 0.9], [0.4, 0.6])),
    ]
    growth_ok = power_ok = True
    for i in range(100):
        env = envs[i % len(envs)]
        pol = PhasedUcbPolicy(0.5, 1 / 6) if i % 2 else KnownEpsUcbPolicy(Fraction(1, 8))
        tr = run(env, pol, SimConfig(2000), seed=i)
        growth_ok &= bool(np.all(tr.q <= tr.t - 1)) and tr.q_next[-1] <= tr.horizon
        power_ok &= check_path_power_bound(np.append(tr.q, tr.q_next[-1]), 2)
    checks = {"fuzzed step Q(t+1) <= t": fuzz_ok, "paths Q(t) <= t - 1": growth_ok, "power bound p=2": power_ok}
    verdict(3, checks, start, 30.0)


def test_criterion_04_one_sided_lipschitz():
    start = time.perf_counter()
    rng = np.random.default_rng(7)
    laws = {
        "point": PointMass(0.37),
        "uniform": Uniform01(),
        "finite": FiniteSupport.from_lists([0.1, 0.35, 0.6, 0.95], [0.1, 0.2, 0.3, 0.4]),
        "reciprocal": TruncatedReciprocal(Fraction(1, 144)),
        **{f"converse-{k}": converse_environment(Fraction(1, 144), k).capacity for k in range(1, 6)},
    }
    checks = {}
    for name, cap in laws.items():
        a, b = rng.random(100_000), rng.random(100_000)
        # mix in atoms and their float neighbours so jumps are exercised
        bp = probe_points(cap, 0.5)
        a[:bp.size], b[-bp.size:] = bp, bp[::-1]
        r1, r2 = np.maximum(a, b), np.minimum(a, b)
        excess = float(np.max(cap.g(r1) - cap.g(r2) - (r1 - r2)))
        checks[f"{name}: max excess {excess:.2e}"] = excess <= 1e-12
    verdict(4, checks, start, 5.0)


def test_criterion_05_grid_existence():
    start = time.perf_counter()
    checks = {}
    for eps in (Fraction(1, 144), Fraction(1, 300)):
        fam = build_converse_family(eps)
        for k in range(1, fam.K + 1):
            cap = converse_environment(eps, k).capacity
            for gamma in (2, 4):
                d = known_eps_grid(eps, gamma)
                best = float(np.max(cap.g(np.arange(1, d + 1) / d)))
                checks[f"eps={eps} k={k} gamma={gamma}"] = best - 0.5 >= (gamma - 1) / gamma * float(eps) - 1e-12
    verdict(5, checks, start, 5.0)


def test_criterion_06_known_eps_stabilization():
    start = time.perf_counter()
    eps = Fraction(1, 16)
    env = converse_environment(eps, 1)
    H = 200_000
    cfg = SimConfig(H, tuple(range(20)), H // 10)
    ucb = run_seeds(env, partial(KnownEpsUcbPolicy, eps), cfg)
    orc = run_seeds(env, partial(OracleGridPolicy, env, known_eps_grid(eps)), cfg)
    at_h = float(np.mean([tr.time_avg_q[-1] for tr in ucb]))
    at_tenth = float(np.mean([tr.time_avg_q[0] for tr in ucb]))
    oracle = float(np.mean([tr.time_avg_q[-1] for tr in orc]))
    checks = {
        f"(a) {at_h:.4g} <= known_eps_bound {known_eps_bound(eps):.6g}": at_h <= known_eps_bound(eps),
        f"(b) {at_h:.4g} <= 3 x oracle {oracle:.4g}": at_h <= 3 * oracle,
        f"(c) {at_h:.4g} <= value at H/10 {at_tenth:.4g}": at_h <= at_tenth,
    }
    verdict(6, checks, start, 300.0)


def test_criterion_07_ucb1_pull_counts():
    start = time.perf_counter()
    cap = FiniteSupport.from_lists([0.2, 0.4, 0.6, 0.8, 1.0], [0.1, 0.1, 0.3, 0.2, 0.3])
    env = custom_environment(Bernoulli(0.3), cap)
    d, H = 5, 10_000
    g = cap.g(np.arange(1, d + 1) / d)
    gaps = g.max() - g
    best = int(np.argmax(g))
    counts = []
    for seed in range(50):
        pol = Ucb1Policy(d)
        run(env, pol, SimConfig(H, (seed,), H), seed)
        counts.append(pol.counts)
    mean_n = np.mean(counts, axis=0)
    checks = {}
    for k in range(d):
        if k == best:
            continue
        checks[f"arm {k + 1}: gap {gaps[k]:.2f} in [0.05, 0.4]"] = 0.05 - 1e-12 <= gaps[k] <= 0.4 + 1e-12
        bound = ucb1_pull_bound(float(gaps[k]), H)
        checks[f"arm {k + 1}: N={mean_n[k]:.1f} <= {bound:.1f}"] = mean_n[k] <= bound
    verdict(7, checks, start, 120.0)


def test_criterion_08_phased_desk_scale():
    start = time.perf_counter()
    from ratebandit.config import load_config

    cfg_file = load_config(CONFIGS / "demo_desk.toml")
    env = make_environment(cfg_file.environment)
    H = 1_000_000
    cfg = SimConfig(H, tuple(range(10)), 1000)
    trs = run_seeds(env, partial(PhasedUcbPolicy, 0.5, 1 / 6), cfg)
    final = float(np.mean([tr.final_time_avg_q for tr in trs]))
    limit = 130 / env.slack

    def seg_mean(tr, slot):
        return next(s.mean_q for s in tr.phases if s.start <= slot <= s.end)

    last = float(np.mean([tr.phases[-1].mean_q for tr in trs]))
    quarter = float(np.mean([seg_mean(tr, H // 4) for tr in trs]))
    checks = {
        f"slack {env.slack:.4g} == 0.25": abs(env.slack - 0.25) < 1e-12,
        f"time-average {final:.4g} <= 130/eps = {limit:.4g}": final <= limit,
        f"final phase {last:.4g} < phase holding H/4 {quarter:.4g}": last < quarter,
    }
    verdict(8, checks, start, 600.0)


def test_criterion_09_bound_cross_checks():
    start = time.perf_counter()
    rng = np.random.default_rng(99)
    eps_draws = rng.uniform(1e-4, 1.0, 20)
    checks = {
        f"corollary2_bound(1) integer part {math.floor(corollary2_bound(1))}": math.floor(corollary2_bound(1)) == 16847111,
        f"converse_horizon(1/144) = {converse_horizon(Fraction(1, 144))}": converse_horizon(Fraction(1, 144)) == 18,
        "theorem1_limit_bound(1/6, eps) == corollary2_limit(eps) x20": all(
            theorem1_limit_bound(1 / 6, e) == pytest.approx(corollary2_limit(e), rel=1e-12) for e in eps_draws
        ),
    }
    for eps in (Fraction(1, 16), Fraction(1, 64), Fraction(1, 144)):
        checks[f"known_eps_bound >= lower_bound at {eps}"] = known_eps_bound(eps) >= lower_bound(eps, proved_only=False)
    verdict(9, checks, start, 1.0)


def test_criterion_10_determinism(tmp_path):
    start = time.perf_counter()
    cfg = tmp_path / "det.toml"
    cfg.write_text(
        (CONFIGS / "figure2.toml").read_text()
        .replace("horizon = 1000000", "horizon = 100000")
        .replace("seeds = [0, 1, 2, 3, 4]", "seeds = [0, 1, 2, 3, 4, 5, 6, 7]")
    )
    a, b = tmp_path / "t1", tmp_path / "t8"
    codes = (
        main(["simulate", "--config", str(cfg), "--out", str(a), "--threads", "1"]),
        main(["simulate", "--config", str(cfg), "--out", str(b), "--threads", "8"]),
    )
    files = sorted(p.name for p in a.iterdir())
    same = files == sorted(p.name for p in b.iterdir()) and all(
        (a / f).read_bytes() == (b / f).read_bytes() for f in files
    )
    checks = {"exit codes 0": codes == (0, 0), f"{len(files)} files byte-identical": same}
    verdict(10, checks, start, 120.0)


def test_criterion_11_kl():
    start = time.perf_counter()
    rng = np.random.default_rng(11)
    a = rng.random(10_000)
    b = rng.uniform(1e-6, 1 - 1e-6, 10_000)
    worst = max(kl_bernoulli(x, y) - kl_quadratic_bound(x, y) for x, y in zip(a, b))
    eps = Fraction(1, 144)
    per_pull = converse_pull_kl(eps)
    cap = 56 * float(eps) ** 2
    checks = {
        f"kl <= quadratic bound (worst excess {worst:.2e})": worst <= 1e-15,
        f"converse per-pull KL max {max(per_pull):.3e} <= 56 eps^2 = {cap:.3e}": max(per_pull) <= cap,
        f"K = {len(per_pull)} intervals": len(per_pull) == 5,
    }
    verdict(11, checks, start, 2.0)
