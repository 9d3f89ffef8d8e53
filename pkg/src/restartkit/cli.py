"""Command-line entry point: ``restartkit {analyze,sequence,simulate,sweep,run}``."""
from __future__ import annotations

import argparse
import json
import re
import sys
from typing import Any, Optional

from . import bench
from .analysis import optimal_threshold, profile_of
from .dist import from_dict
from .errors import ConfigError, NoFiniteMass, RestartKitError, SpawnError
from .rng import SampleStream
from .strategy import schedule_from_dict
from .supervisor import EXIT_SPAWN, CommandSpec, Limits, supervise

EXIT_OK, EXIT_USAGE = 0, 1

_UNIT_RE = re.compile(r"^\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s*(ms|s|m)?\s*$")
_UNIT_SCALE = {"ms": 1e-3, "s": 1.0, "m": 60.0, None: 1.0}


def parse_duration(text) -> float:
    """'100ms' -> 0.1, '2s' -> 2.0, '1.5m' -> 90.0; bare numbers are seconds."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _UNIT_RE.match(str(text))
    if not m:
        raise ConfigError(f"bad duration {text!r}; use a number with optional ms, s or m")
    return float(m.group(1)) * _UNIT_SCALE[m.group(2)]


def _scalar(v: str):
    try:
        return json.loads(v)
    except json.JSONDecodeError:
        return v


def parse_dist(text):
    """A JSON object, or the short form ``kind:key=value,key=value``."""
    if isinstance(text, dict):
        return from_dict(text)
    text = text.strip()
    if text.startswith("{"):
        try:
            return from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--dist is not valid JSON: {exc}") from exc
    kind, _, rest = text.partition(":")
    spec: dict[str, Any] = {"kind": kind}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"--dist entry {item!r} must look like key=value")
        spec[key.strip()] = _scalar(val.strip())
    return from_dict(spec)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _strategy_flags(p):
    p.add_argument("--strategy", help="fixed | exponential | luby | zeta2 | bin")
    p.add_argument("--delta", type=float, help="fixed threshold, or growth rate for exponential")
    p.add_argument("--s", type=float, dest="s", help="first TTL of exponential search")
    p.add_argument("--max-bits", type=int, dest="max_bits")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--output", help="file to write; default standard output")
    common.add_argument("--format", choices=("csv", "jsonl"))
    common.add_argument("--config", help="JSON file; flags given on the command line win")

    p = _Parser(prog="restartkit", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", parents=[common], help="optimal threshold and profile")
    a.add_argument("--dist")

    s = sub.add_parser("sequence", parents=[common], help="print the first N TTLs")
    _strategy_flags(s)
    s.add_argument("--unit", help="TTL unit for luby, zeta2 and bin")
    s.add_argument("-n", "--count", type=int)

    sim = sub.add_parser("simulate", parents=[common], help="Monte Carlo one configuration")
    sim.add_argument("--dist")
    _strategy_flags(sim)
    sim.add_argument("--unit", help="TTL unit for luby, zeta2 and bin")
    sim.add_argument("--model", choices=bench.MODELS)
    sim.add_argument("--capacity", type=int)
    sim.add_argument("--speeds", help="harmonic | polylog")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--max-attempts", type=int, dest="max_attempts")
    sim.add_argument("--max-total-work", type=float, dest="max_total_work")
    sim.add_argument("--trim", type=float)
    sim.add_argument("--jobs", type=int, default=1)

    sw = sub.add_parser("sweep", parents=[common], help="run every row of a sweep file")
    sw.add_argument("grid", help="JSON file: a list of configs or {\"grid\": [...]}")
    sw.add_argument("--jobs", type=int, default=1)

    r = sub.add_parser("run", parents=[common], help="supervise a real command")
    _strategy_flags(r)
    r.add_argument("--unit", help="seconds per TTL unit, e.g. 100ms")
    r.add_argument("--mode", choices=("restart", "cached"))
    r.add_argument("--capacity", type=int)
    r.add_argument("--max-attempts", type=int, dest="max_attempts")
    r.add_argument("--max-wall", dest="max_wall")
    r.add_argument("--grace")
    r.add_argument("--success-codes", dest="success_codes", help="comma-separated, default 0")
    r.add_argument("cmd", nargs=argparse.REMAINDER, help="-- program [args...]")
    return p


_ALLOWED = {
    "analyze": {"dist", "seed", "output", "format"},
    "sequence": {"strategy", "delta", "s", "max_bits", "unit", "count", "seed", "output", "format"},
    "simulate": {"dist", "strategy", "delta", "s", "max_bits", "unit", "model", "capacity", "speeds",
                 "trials", "max_attempts", "max_total_work", "trim", "seed", "output", "format"},
    "sweep": {"seed", "output", "format"},
    "run": {"strategy", "delta", "s", "max_bits", "unit", "mode", "capacity", "max_attempts",
            "max_wall", "grace", "success_codes", "command", "seed", "output", "format"},
}
_NOT_CONFIG = {"command", "config", "jobs", "grid", "cmd"}


def merged_config(args) -> dict[str, Any]:
    """Config file values overlaid by explicitly given flags; unknown keys rejected."""
    cfg: dict[str, Any] = {}
    if args.config:
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    allowed = _ALLOWED[args.command]
    bad = sorted(set(cfg) - allowed)
    if bad:
        raise ConfigError(f"unknown config key(s) for {args.command}: {', '.join(bad)}")
    for k, v in vars(args).items():
        if k not in _NOT_CONFIG and v is not None:
            cfg[k] = v
    if args.command == "run" and getattr(args, "cmd", None):
        argv = args.cmd[1:] if args.cmd[0] == "--" else args.cmd
        if argv:
            cfg["command"] = argv
    return cfg


_STRATEGY_PARAMS = {
    "fixed": ("delta",),
    "exponential": ("s", "delta"),
    "luby": ("unit",),
    "zeta2": ("unit",),
    "bin": ("unit", "max_bits"),
}


def strategy_of(cfg: dict, unit_is_param: bool = True):
    spec = cfg.get("strategy")
    if spec is None:
        raise ConfigError("a strategy is required (--strategy)")
    spec = dict(spec) if isinstance(spec, dict) else {"kind": spec}
    kind = spec.get("kind")
    allowed = _STRATEGY_PARAMS.get(kind)
    if allowed is None:
        raise ConfigError(f"unknown strategy kind {kind!r}")
    for key in ("delta", "s", "max_bits", "unit"):
        if key == "unit" and not unit_is_param:
            continue
        if key in cfg:
            if key not in allowed:
                raise ConfigError(f"--{key.replace('_', '-')} does not apply to strategy {kind}")
            spec[key] = parse_duration(cfg[key]) if key == "unit" else cfg[key]
    return schedule_from_dict(spec)


def _emit_rows(rows, cfg):
    bench.export(rows, cfg.get("format", "csv"), cfg.get("output"))


def cmd_analyze(cfg) -> int:
    if "dist" not in cfg:
        raise ConfigError("analyze needs --dist")
    d = parse_dist(cfg["dist"])
    pol, prof = optimal_threshold(d), profile_of(d)
    out = {"delta": pol.delta, "expected_cost": pol.expected_cost,
           "inv_rho": prof.inv_rho, "threshold": prof.threshold, "work": prof.work}
    _write_text(json.dumps(out) + "\n", cfg.get("output"))
    return EXIT_OK


def cmd_sequence(cfg) -> int:
    n = cfg.get("count")
    if n is None or n < 1:
        raise ConfigError("sequence needs -n N with N >= 1")
    sched = strategy_of(cfg)
    rng = SampleStream(cfg.get("seed", 0))
    text = "".join(format(t, ".12g") + "\n" for t in sched.take(n, rng))
    _write_text(text, cfg.get("output"))
    return EXIT_OK


def _bench_config(cfg) -> bench.BenchConfig:
    spec = {k: cfg[k] for k in ("model", "capacity", "trials", "seed", "max_attempts",
                                "max_total_work", "trim", "speeds") if k in cfg}
    if "dist" not in cfg:
        raise ConfigError("simulate needs --dist")
    spec["dist"] = parse_dist(cfg["dist"])
    model = cfg.get("model", "restart")
    if model in ("restart", "cached"):
        spec["strategy"] = strategy_of(cfg).to_dict()
    elif "speeds" not in spec:
        spec["speeds"] = "harmonic"
    return bench.config_from_dict(spec)


def cmd_simulate(cfg, jobs: int) -> int:
    _emit_rows([bench.monte_carlo(_bench_config(cfg), jobs)], cfg)
    return EXIT_OK


def cmd_sweep(cfg, grid_path: str, jobs: int) -> int:
    try:
        with open(grid_path) as fh:
            grid = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read sweep file {grid_path}: {exc}") from exc
    if isinstance(grid, dict):
        grid = grid.get("grid")
    if not isinstance(grid, list) or not grid:
        raise ConfigError("sweep file must hold a nonempty list of configs")
    allowed = _ALLOWED["simulate"] - {"output", "format"}
    configs = []
    for i, row in enumerate(grid):
        try:
            if not isinstance(row, dict):
                raise ConfigError("each row must be a JSON object")
            bad = sorted(set(row) - allowed)
            if bad:
                raise ConfigError(f"unknown key(s): {', '.join(bad)}")
            row = dict(row)
            if "seed" in cfg:
                row.setdefault("seed", cfg["seed"])
            configs.append(_bench_config(row))
        except ConfigError as exc:
            raise ConfigError(f"sweep row {i}: {exc}") from exc
    _emit_rows(bench.sweep(configs, jobs), cfg)
    return EXIT_OK


def cmd_run(cfg) -> int:
    argv = cfg.get("command")
    if not argv:
        raise ConfigError("run needs a command after --")
    if isinstance(argv, str):
        argv = [argv]
    codes = cfg.get("success_codes", "0")
    if isinstance(codes, str):
        try:
            codes = [int(c) for c in codes.split(",") if c.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --success-codes {cfg['success_codes']!r}") from exc
    spec = CommandSpec(argv[0], tuple(argv[1:]), success_codes=frozenset(codes))
    limits = Limits(
        max_attempts=cfg.get("max_attempts"),
        max_wall=parse_duration(cfg["max_wall"]) if "max_wall" in cfg else None,
        grace=parse_duration(cfg.get("grace", 0.1)),
    )
    sched = strategy_of(cfg, unit_is_param=False)
    unit = parse_duration(cfg.get("unit", 1.0))
    log_path = cfg.get("output")
    log = log_path if log_path not in (None, "-") else sys.stdout
    try:
        report = supervise(spec, sched, unit, cfg.get("mode", "restart"), cfg.get("capacity", 0),
                           limits, SampleStream(cfg.get("seed", 0)), log)
    except SpawnError as exc:
        print(f"restartkit run: {exc}", file=sys.stderr)
        return EXIT_SPAWN
    summary = {"success": report.success, "attempts": report.attempts,
               "exit_status": report.exit_status, "reason": report.reason}
    print(json.dumps(summary), file=sys.stderr)
    return report.exit_status


def _write_text(text: str, path: Optional[str]) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = merged_config(args)
        if args.command == "analyze":
            return cmd_analyze(cfg)
        if args.command == "sequence":
            return cmd_sequence(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.jobs)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.grid, args.jobs)
        return cmd_run(cfg)
    except NoFiniteMass as exc:
        print(f"restartkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (RestartKitError, OSError, ValueError) as exc:
        print(f"restartkit {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
