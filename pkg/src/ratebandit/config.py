"""Run configuration: one TOML document per run, strict about unknown keys.

Layout::

    schema_version = 1
    horizon = 1000000
    seeds = [0, 1, 2, 3, 4]
    record_stride = 1000

    [environment]
    family = "converse"
    epsilon = "1/144"
    k = 1

    [policy]
    name = "phased-ucb"
    C = 0.04
    delta = "1/6"

Optional tables: ``[sweep]`` (epsilons, policies, k, phased), ``[bounds]``
(epsilons) and ``[verify]`` (grid_step).  Rationals may be written as strings.
"""

from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ratebandit.errors import ConfigError

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema_version", "horizon", "seeds", "record_stride", "environment", "policy", "sweep", "bounds", "verify"}
_SWEEP_KEYS = {"epsilons", "policies", "k", "phased"}
_BOUNDS_KEYS = {"epsilons"}
_VERIFY_KEYS = {"grid_step"}


@dataclass
class RunConfig:
    horizon: int | None = None
    seeds: list = field(default_factory=lambda: [0])
    record_stride: int = 1
    environment: dict | None = None
    policy: dict | None = None
    sweep: dict | None = None
    bounds: dict | None = None
    verify: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"schema_version": SCHEMA_VERSION}
        for key in ("horizon", "seeds", "record_stride", "environment", "policy", "sweep", "bounds", "verify"):
            val = getattr(self, key)
            if val is not None and val != {}:
                out[key] = copy.deepcopy(val)
        return out


def _table(doc: Mapping, key: str, allowed: set | None) -> dict | None:
    if key not in doc:
        return None
    val = doc[key]
    if not isinstance(val, Mapping):
        raise ConfigError(f"{key}: expected a table")
    if allowed is not None:
        unknown = set(val) - allowed
        if unknown:
            raise ConfigError(f"{key}: unknown keys {sorted(unknown)}")
    return dict(val)


def _int(val, name: str) -> int:
    if isinstance(val, bool) or not isinstance(val, int):
        raise ConfigError(f"{name} must be an integer, got {val!r}")
    return val


def parse_config(doc: Mapping) -> RunConfig:
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"schema_version must be {SCHEMA_VERSION}, got {version!r}")
    cfg = RunConfig()
    if "horizon" in doc:
        cfg.horizon = _int(doc["horizon"], "horizon")
        if cfg.horizon < 1:
            raise ConfigError("horizon must be >= 1")
    if "seeds" in doc:
        seeds = doc["seeds"]
        if not isinstance(seeds, list) or not seeds:
            raise ConfigError("seeds must be a non-empty list of integers")
        cfg.seeds = [_int(s, "seed") for s in seeds]
    if "record_stride" in doc:
        cfg.record_stride = _int(doc["record_stride"], "record_stride")
        if cfg.record_stride < 1:
            raise ConfigError("record_stride must be >= 1")
    # environment and policy keys are checked by their factories
    cfg.environment = _table(doc, "environment", None)
    cfg.policy = _table(doc, "policy", None)
    cfg.sweep = _table(doc, "sweep", _SWEEP_KEYS)
    cfg.bounds = _table(doc, "bounds", _BOUNDS_KEYS)
    cfg.verify = _table(doc, "verify", _VERIFY_KEYS) or {}
    if cfg.sweep is not None:
        eps = cfg.sweep.get("epsilons")
        if not isinstance(eps, list) or not eps:
            raise ConfigError("sweep.epsilons must be a non-empty list")
        pol = cfg.sweep.get("policies", ["ucb1-known-eps", "oracle-grid"])
        if not isinstance(pol, list) or not pol:
            raise ConfigError("sweep.policies must be a non-empty list")
    if cfg.bounds is not None:
        eps = cfg.bounds.get("epsilons")
        if not isinstance(eps, list) or not eps:
            raise ConfigError("bounds.epsilons must be a non-empty list")
    return cfg


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        raw = p.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from exc
    try:
        doc = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{p}: {exc}") from exc
    return parse_config(doc)
