"""Monte Carlo harness over the engine simulators.

Trial j of a config always uses ``SampleStream(seed, j)``, so results do not
depend on worker count or scheduling order.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy import stats

from . import dist as _dist
from .analysis import optimal_threshold
from .engine import NO_CAPS, Caps, compile_restart, run_cached, run_restart, run_wide, run_wide_as_restart
from .errors import ConfigError, NoFiniteMass
from .rng import SampleStream
from .strategy import SpeedSchedule, TtlSchedule, make_speeds, schedule_from_dict

MODELS = ("restart", "cached", "wide", "wide_as_restart")

CSV_COLUMNS = (
    "kind", "model", "dist", "param1", "param2", "trials", "seed",
    "mean", "trimmed_mean", "median", "p90", "p99", "censored",
    "analytic_opt", "ratio_opt", "ratio_opt_log",
)


@dataclass(frozen=True)
class BenchConfig:
    dist: _dist.RuntimeDistribution
    schedule: Optional[TtlSchedule] = None
    speeds: Optional[SpeedSchedule] = None
    model: str = "restart"
    capacity: int = 0
    trials: int = 1000
    seed: int = 0
    caps: Caps = NO_CAPS
    trim: float = 0.01
    # run the reference loop even when an equivalent fast sampler exists
    reference: bool = False

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0.0 <= self.trim < 0.5:
            raise ConfigError("trim must lie in [0, 0.5)")
        if self.model in ("restart", "cached") and self.schedule is None:
            raise ConfigError(f"model {self.model} needs a TTL schedule")
        if self.model in ("wide", "wide_as_restart") and self.speeds is None:
            raise ConfigError(f"model {self.model} needs a speed schedule")
        if self.capacity < 0:
            raise ConfigError("capacity must be nonnegative")

    @property
    def kind(self) -> str:
        src = self.schedule if self.model in ("restart", "cached") else self.speeds
        return src.kind

    @property
    def model_label(self) -> str:
        return f"cached({self.capacity})" if self.model == "cached" else self.model


@dataclass
class BenchResult:
    config: BenchConfig
    mean: float = math.nan
    trimmed_mean: float = math.nan
    median: float = math.nan
    p90: float = math.nan
    p99: float = math.nan
    sem: float = math.nan
    censored_count: int = 0
    analytic_opt: Optional[float] = None
    ratio_opt: Optional[float] = None
    ratio_opt_log: Optional[float] = None
    error: Optional[str] = None
    works: np.ndarray = field(default=None, repr=False)
    attempts: np.ndarray = field(default=None, repr=False)

    @property
    def censored_heavy(self) -> bool:
        return self.censored_count > 0.1 * self.config.trials

    def row(self) -> dict[str, Any]:
        cfg = self.config
        p1, p2 = cfg.dist.params()
        return {
            "kind": cfg.kind, "model": cfg.model_label, "dist": cfg.dist.kind,
            "param1": p1, "param2": p2, "trials": cfg.trials, "seed": cfg.seed,
            "mean": self.mean, "trimmed_mean": self.trimmed_mean, "median": self.median,
            "p90": self.p90, "p99": self.p99, "censored": self.censored_count,
            "analytic_opt": self.analytic_opt, "ratio_opt": self.ratio_opt,
            "ratio_opt_log": self.ratio_opt_log,
        }


def log_scaled(opt: float) -> float:
    """O * (1 + log2 max(O, 2)), the normaliser of the universal-strategy bounds."""
    return opt * (1.0 + math.log2(max(opt, 2.0)))


def _runner(cfg: BenchConfig):
    d, caps = cfg.dist, cfg.caps
    if cfg.model == "restart":
        if cfg.reference:
            return lambda rng: run_restart(d, cfg.schedule.clone(), rng, caps)
        sampler = compile_restart(d, cfg.schedule)
        return lambda rng: sampler.run(rng, caps)
    if cfg.model == "cached":
        return lambda rng: run_cached(d, cfg.schedule.clone(), cfg.capacity, rng, caps)
    if cfg.model == "wide":
        return lambda rng: run_wide(d, cfg.speeds, rng, caps)
    return lambda rng: run_wide_as_restart(d, cfg.speeds, rng, caps)


def _run_chunk(cfg: BenchConfig, lo: int, hi: int):
    run = _runner(cfg)
    outs = [run(SampleStream(cfg.seed, j)) for j in range(lo, hi)]
    works = np.array([o.total_work for o in outs], dtype=float)
    attempts = np.array([o.attempts for o in outs], dtype=np.int64)
    censored = np.array([o.censored for o in outs], dtype=bool)
    return works, attempts, censored


def _analytic(d) -> Optional[float]:
    try:
        return optimal_threshold(d).expected_cost
    except (NoFiniteMass, TypeError):
        return None


def monte_carlo(cfg: BenchConfig, n_jobs: int = 1) -> BenchResult:
    n = cfg.trials
    if n_jobs <= 1 or n < 2 * n_jobs:
        works, attempts, censored = _run_chunk(cfg, 0, n)
    else:
        bounds = np.linspace(0, n, n_jobs * 4 + 1).astype(int)
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(_run_chunk, [cfg] * (len(bounds) - 1), bounds[:-1], bounds[1:]))
        works = np.concatenate([p[0] for p in parts])
        attempts = np.concatenate([p[1] for p in parts])
        censored = np.concatenate([p[2] for p in parts])
    res = BenchResult(cfg, works=works, attempts=attempts)
    res.mean = float(works.mean())
    # trim is the total fraction removed, half from each tail
    res.trimmed_mean = float(stats.trim_mean(works, cfg.trim / 2))
    res.median, res.p90, res.p99 = (float(v) for v in np.percentile(works, [50, 90, 99]))
    res.sem = float(works.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    res.censored_count = int(censored.sum())
    opt = _analytic(cfg.dist)
    if opt is not None:
        res.analytic_opt = opt
        res.ratio_opt = res.trimmed_mean / opt
        res.ratio_opt_log = res.trimmed_mean / log_scaled(opt)
    return res


def sweep(grid: Sequence[BenchConfig], n_jobs: int = 1) -> list[BenchResult]:
    if not grid:
        raise ValueError("sweep grid is empty")
    out = []
    for cfg in grid:
        try:
            out.append(monte_carlo(cfg, n_jobs))
        except Exception as exc:  # recorded per row; the rest of the grid still runs
            out.append(BenchResult(cfg, error=f"{type(exc).__name__}: {exc}"))
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    return str(v)


def _json_value(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(format(v, ".12g")) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def export(results: Sequence[BenchResult], fmt: str, destination) -> None:
    """Write rows as CSV (fixed header) or JSONL, numbers to 12 significant digits."""
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"unknown format {fmt!r}")
    try:
        if destination in (None, "-"):
            import sys
            _write(results, fmt, sys.stdout)
        else:
            with open(os.fspath(destination), "w", newline="") as fh:
                _write(results, fmt, fh)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {destination}: {exc.strerror}") from exc


def _write(results, fmt, fh):
    if fmt == "csv":
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in results:
            row = r.row()
            w.writerow([_fmt(row[c]) for c in CSV_COLUMNS])
    else:
        for r in results:
            obj = {k: _json_value(v) for k, v in r.row().items()}
            obj["sem"] = _json_value(r.sem)
            obj["error"] = r.error
            fh.write(json.dumps(obj) + "\n")
        fh.flush()


# config files for sweeps and the CLI

_CONFIG_KEYS = {
    "dist", "strategy", "speeds", "model", "capacity", "trials", "seed",
    "max_attempts", "max_total_work", "trim",
}


def config_from_dict(spec: dict[str, Any]) -> BenchConfig:
    """Build a config from a JSON object; unknown keys are rejected by name."""
    if not isinstance(spec, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(spec) - _CONFIG_KEYS
    if extra:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(extra))}")
    if "dist" not in spec:
        raise ConfigError("config needs a 'dist' entry")
    d = spec["dist"] if isinstance(spec["dist"], _dist.RuntimeDistribution) else _dist.from_dict(spec["dist"])
    sched = schedule_from_dict(spec["strategy"]) if spec.get("strategy") is not None else None
    speeds = None
    if spec.get("speeds") is not None:
        sp = spec["speeds"]
        sp = {"kind": sp} if isinstance(sp, str) else dict(sp)
        speeds = make_speeds(sp.pop("kind"), **sp)
    try:
        caps = Caps(spec.get("max_attempts"), spec.get("max_total_work"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return BenchConfig(
        dist=d, schedule=sched, speeds=speeds,
        model=spec.get("model", "restart"), capacity=int(spec.get("capacity", 0)),
        trials=int(spec.get("trials", 1000)), seed=int(spec.get("seed", 0)),
        caps=caps, trim=float(spec.get("trim", 0.01)),
    )
