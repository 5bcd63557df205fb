"""Command-line entry point: simulate, sweep, verify-env, bounds, replay.

Exit codes: 0 success, 1 a checked property failed, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import functools
import json
import os
import sys
from pathlib import Path

from ratebandit import bounds as B
from ratebandit._num import as_fraction
from ratebandit.config import RunConfig, load_config, parse_config
from ratebandit.dists import converse_environment, make_environment, verify_env, verify_family
from ratebandit.errors import ConfigError, DomainError
from ratebandit.policy import KnownEpsUcbPolicy, OracleGridPolicy, PhasedUcbPolicy, known_eps_grid, make_policy
from ratebandit.sim import SimConfig, aggregate, fmt, read_trajectory_csv, replay_rows, run_seeds

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "RATEBANDIT_THREADS"


class UsageError(Exception):
    pass


def parse_seeds(text: str) -> list[int]:
    """'0,1,2' or '0-4' (inclusive) or a mix such as '0-2,10'."""
    seeds = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part[1:]:
                i = part.index("-", 1)
                lo, hi = int(part[:i]), int(part[i + 1:])
                if hi < lo:
                    raise ValueError(part)
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError as exc:
        raise ConfigError(f"bad --seeds value {text!r}") from exc
    if not seeds:
        raise ConfigError("--seeds is empty")
    return seeds


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, n)


def resolve(args) -> RunConfig:
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = parse_config({"schema_version": 1})
    if args.horizon is not None:
        if args.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        cfg.horizon = args.horizon
    if args.seeds is not None:
        cfg.seeds = parse_seeds(args.seeds)
    if args.stride is not None:
        if args.stride < 1:
            raise ConfigError("stride must be >= 1")
        cfg.record_stride = args.stride
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write(path: Path, text: str) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(text)


def phases_csv(trajectories) -> str:
    lines = ["seed,l,T_l,d_l,start,end,mean_q,arm_counts"]
    for tr in trajectories:
        for seg in tr.phases:
            counts = ";".join(str(c) for c in seg.counts)
            lines.append(f"{tr.seed},{seg.l},{seg.T_l},{seg.d_l},{seg.start},{seg.end},{fmt(seg.mean_q)},{counts}")
    return "\n".join(lines) + "\n"


def simulate(cfg: RunConfig, threads: int):
    if cfg.horizon is None:
        raise ConfigError("horizon is required (config or --horizon)")
    if cfg.environment is None or cfg.policy is None:
        raise ConfigError("[environment] and [policy] tables are required")
    env = make_environment(cfg.environment)
    make_policy(cfg.policy, env)  # validate before forking
    sim_cfg = SimConfig(cfg.horizon, tuple(cfg.seeds), cfg.record_stride)
    factory = functools.partial(make_policy, cfg.policy, env)
    trajs = run_seeds(env, factory, sim_cfg, threads)
    return env, aggregate(trajs)


def cmd_simulate(args) -> int:
    cfg = resolve(args)
    env, agg = simulate(cfg, args.threads)
    out = _out_dir(args)
    _write(out / "summary.csv", agg.to_csv())
    for tr in agg.trajectories:
        _write(out / f"trajectory_seed{tr.seed}.csv", tr.to_csv())
    if any(tr.phases for tr in agg.trajectories):
        _write(out / "phases.csv", phases_csv(agg.trajectories))
    meta = {
        "config": cfg.to_dict(),
        "environment": env.to_spec(),
        "slack": env.slack,
        "seeds": [tr.summary() for tr in agg.trajectories],
        "mean_time_avg_q": agg.final_mean,
        "se": agg.final_se,
    }
    _write(out / "run.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"{env.name}: H={cfg.horizon} seeds={len(agg.seeds)} "
          f"time-average queue {agg.final_mean:.6g} (se {agg.final_se:.3g})")
    print(f"wrote {out}")
    return EXIT_OK


SWEEP_COLUMNS = (
    "epsilon", "policy", "d", "H", "seeds", "mean_time_avg_q", "se",
    "known_eps_bound", "corollary2_bound", "lower_bound", "within_known_eps_bound",
)


def _sweep_policy(name: str, eps, env, phased: dict):
    if name == "ucb1-known-eps":
        return functools.partial(KnownEpsUcbPolicy, eps), known_eps_grid(eps)
    if name == "oracle-grid":
        d = known_eps_grid(eps)
        return functools.partial(OracleGridPolicy, env, d), d
    if name == "phased-ucb":
        return functools.partial(make_policy, {"name": "phased-ucb", **phased}), ""
    raise ConfigError(f"sweep: unsupported policy {name!r}")


def cmd_sweep(args) -> int:
    cfg = resolve(args)
    if cfg.sweep is None:
        raise ConfigError("a [sweep] table is required")
    if cfg.horizon is None:
        raise ConfigError("horizon is required (config or --horizon)")
    k = cfg.sweep.get("k", 1)
    phased = cfg.sweep.get("phased", {})
    sim_cfg = SimConfig(cfg.horizon, tuple(cfg.seeds), cfg.record_stride)
    rows = [",".join(SWEEP_COLUMNS)]
    all_ok = True
    for raw_eps in cfg.sweep["epsilons"]:
        try:
            eps = as_fraction(raw_eps)
            env = converse_environment(eps, k)
        except (DomainError, ValueError, TypeError, ZeroDivisionError) as exc:
            raise ConfigError(f"sweep: epsilon {raw_eps!r}: {exc}") from exc
        bound = B.known_eps_bound(float(eps))
        cor2 = B.corollary2_bound(float(eps))
        low = B.lower_bound(eps) if eps <= B.CONVERSE_EPS_MAX else None
        for name in cfg.sweep.get("policies", ["ucb1-known-eps", "oracle-grid"]):
            factory, d = _sweep_policy(name, eps, env, phased)
            agg = aggregate(run_seeds(env, factory, sim_cfg, args.threads))
            ok = agg.final_mean <= bound
            all_ok &= ok
            rows.append(",".join([
                fmt(eps), name, str(d), str(cfg.horizon), str(len(cfg.seeds)),
                fmt(agg.final_mean), fmt(agg.final_se), fmt(bound), fmt(cor2),
                "" if low is None else fmt(low), "pass" if ok else "FAIL",
            ]))
            print(f"eps={eps} {name}: {agg.final_mean:.6g} (bound {bound:.6g}) {'pass' if ok else 'FAIL'}")
    out = _out_dir(args)
    _write(out / "sweep.csv", "\n".join(rows) + "\n")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK if all_ok else EXIT_FAIL


def cmd_verify_env(args) -> int:
    cfg = resolve(args)
    grid_step = float(cfg.verify.get("grid_step", args.grid_step))
    if args.epsilon is not None:
        env_spec = {"family": "converse", "epsilon": args.epsilon}
    elif cfg.environment is not None:
        env_spec = cfg.environment
    else:
        raise ConfigError("verify-env needs --epsilon or an [environment] table")
    if env_spec.get("family") == "converse" and "k" not in env_spec:
        try:
            fam, reports = verify_family(env_spec.get("epsilon"), grid_step)
        except (DomainError, ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from exc
        header = f"K={fam.K}"
    else:
        reports = [verify_env(make_environment(env_spec), grid_step)]
        header = reports[0].env_name
    text = "environment,check,passed,detail\n" + "".join(r.to_csv().split("\n", 1)[1] for r in reports)
    if args.out:
        _write(_out_dir(args) / "verify.csv", text)
    failed = [f"{r.env_name}:{c.name}" for r in reports for c in r.checks if not c.passed]
    if args.verbose:
        sys.stdout.write(text)
    if failed:
        print(f"{header}, {len(failed)} claim(s) FAIL: {', '.join(failed)}")
        return EXIT_FAIL
    print(f"{header}, all claims pass")
    return EXIT_OK


def cmd_bounds(args) -> int:
    cfg = resolve(args)
    if args.epsilon is not None:
        eps_list = [e for e in args.epsilon.split(",") if e.strip()]
    elif cfg.bounds is not None:
        eps_list = cfg.bounds["epsilons"]
    else:
        raise ConfigError("bounds needs --epsilon or a [bounds] table")
    try:
        table = B.bound_table(eps_list)
    except (ValueError, TypeError, ZeroDivisionError) as exc:
        raise ConfigError(str(exc)) from exc
    lines = [",".join(B.BOUND_COLUMNS)]
    for row in table:
        cells = []
        for col in B.BOUND_COLUMNS:
            v = row[col]
            cells.append("" if v is None else (str(v) if isinstance(v, int) else fmt(v)))
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    if args.out:
        _write(_out_dir(args) / "bounds.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_replay(args) -> int:
    target = Path(args.path)
    if target.is_dir():
        files = sorted(target.glob("trajectory_seed*.csv"))
        if not files:
            raise ConfigError(f"no trajectory_seed*.csv files in {target}")
    elif target.is_file():
        files = [target]
    else:
        raise ConfigError(f"{target} does not exist")
    status = EXIT_OK
    for path in files:
        tr = read_trajectory_csv(path.read_text())
        bad = replay_rows(tr)
        if bad:
            print(f"{path.name}: {len(bad)} row(s) disagree, first at t={bad[0]}")
            status = EXIT_FAIL
        else:
            print(f"{path.name}: {len(tr.t)} rows replay exactly")
    meta_path = (target if target.is_dir() else target.parent) / "run.json"
    if target.is_dir() and meta_path.exists():
        meta = json.loads(meta_path.read_text())
        cfg = parse_config(meta["config"])
        _, agg = simulate(cfg, args.threads)
        for tr in agg.trajectories:
            path = target / f"trajectory_seed{tr.seed}.csv"
            same = path.exists() and path.read_text() == tr.to_csv()
            print(f"{path.name}: re-simulation {'identical' if same else 'DIFFERS'}")
            if not same:
                status = EXIT_FAIL
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seeds", help="seed list, e.g. 0,1,2 or 0-19")
    common.add_argument("--horizon", type=int, help="number of slots H")
    common.add_argument("--stride", type=int, help="record every stride-th slot (the last slot is always kept)")
    common.add_argument("--threads", type=int, default=None,
                        help=f"parallel workers across seeds (default ${THREADS_ENV} or 1)")

    parser = argparse.ArgumentParser(prog="ratebandit", description="Rate adaptation with ACK/NACK feedback.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="run one policy on one environment over several seeds")
    p.set_defaults(func=cmd_simulate, out_required=True)
    p = sub.add_parser("sweep", parents=[common], help="epsilon grid against the closed-form bounds")
    p.set_defaults(func=cmd_sweep, out_required=True)
    p = sub.add_parser("verify-env", parents=[common], help="check the structural claims of an environment")
    p.add_argument("--epsilon", help="verify the whole converse family at this epsilon")
    p.add_argument("--grid-step", type=float, default=1e-5)
    p.add_argument("-v", "--verbose", action="store_true", help="print every check")
    p.set_defaults(func=cmd_verify_env, out_required=False)
    p = sub.add_parser("bounds", parents=[common], help="print the bound table for a list of epsilons")
    p.add_argument("--epsilon", help="comma-separated epsilons, e.g. 1,1/16,1/144")
    p.set_defaults(func=cmd_bounds, out_required=False)
    p = sub.add_parser("replay", parents=[common], help="re-apply the queue step to trajectory CSVs")
    p.add_argument("path", help="a trajectory CSV or a simulate output directory")
    p.set_defaults(func=cmd_replay, out_required=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        if args.threads is None:
            args.threads = default_threads()
        if args.out_required and not args.out:
            raise ConfigError("--out is required")
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
