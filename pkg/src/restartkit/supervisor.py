"""Run a real command under a TTL schedule.

Each child gets its own process group so that expiry signals reach anything
it spawned. In cached mode an expired child is stopped with SIGSTOP and may
later be continued; otherwise it is terminated, then killed after a grace
period.
"""
from __future__ import annotations

import json
import os
import signal
import subprocess
import time
from dataclasses import asdict, dataclass, field
from typing import IO, Optional, Sequence

from .errors import ClockAnomaly, ConfigError, SpawnError
from .rng import SampleStream
from .strategy import TtlSchedule

EXIT_SUCCESS = 0
EXIT_LIMITS = 2
EXIT_SPAWN = 3

SUCCESS = "success"
KILLED = "killed"
SUSPENDED = "suspended"
RESUMED_KILLED = "resumed-then-killed"
SPAWN_ERROR = "spawn-error"
FAILED = "failed"  # exited on its own with a code outside the success set


@dataclass(frozen=True)
class CommandSpec:
    program: str
    args: Sequence[str] = ()
    env: Optional[dict] = None
    cwd: Optional[str] = None
    success_codes: frozenset = frozenset({0})

    def __post_init__(self):
        if not self.program:
            raise ConfigError("program path must be nonempty")

    def argv(self) -> list[str]:
        return [self.program, *self.args]


@dataclass(frozen=True)
class Limits:
    max_attempts: Optional[int] = None
    max_wall: Optional[float] = None
    grace: float = 0.1


@dataclass
class AttemptRecord:
    attempt: int
    ttl_s: float
    start_unix_ms: float
    end_unix_ms: float
    outcome: str
    exit_code: Optional[int] = None
    progress_s: Optional[float] = None
    spawn_latency_ms: Optional[float] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self))


@dataclass
class SupervisorReport:
    success: bool
    exit_status: int
    records: list = field(default_factory=list)
    reason: str = ""

    @property
    def attempts(self) -> int:
        return len(self.records)

    @property
    def fresh_starts(self) -> int:
        return sum(1 for r in self.records if r.spawn_latency_ms is not None)


@dataclass
class _Child:
    proc: subprocess.Popen
    progress: float
    birth: int
    resumed: bool = False


class _Clock:
    """Monotonic clock that refuses to go backwards."""

    def __init__(self):
        self.last = time.monotonic()
        self.origin_unix = time.time()
        self.origin = self.last

    def now(self) -> float:
        t = time.monotonic()
        if t < self.last:
            raise ClockAnomaly(f"monotonic clock went from {self.last} back to {t}")
        self.last = t
        return t

    def unix_ms(self, t: float) -> float:
        return round((self.origin_unix + (t - self.origin)) * 1000.0, 3)


def _signal_group(proc: subprocess.Popen, sig: int) -> None:
    try:
        os.killpg(proc.pid, sig)
    except (ProcessLookupError, PermissionError):
        pass


def _terminate(proc: subprocess.Popen, grace: float) -> Optional[int]:
    """SIGTERM the group, SIGKILL after ``grace`` seconds; always reaps."""
    _signal_group(proc, signal.SIGTERM)
    _signal_group(proc, signal.SIGCONT)  # a stopped child cannot act on SIGTERM
    try:
        return proc.wait(timeout=grace)
    except subprocess.TimeoutExpired:
        _signal_group(proc, signal.SIGKILL)
        return proc.wait()
    finally:
        # stray members of the group that ignored SIGTERM
        _signal_group(proc, signal.SIGKILL)


class _Log:
    def __init__(self, sink):
        self._own = isinstance(sink, (str, os.PathLike))
        self._fh: Optional[IO[str]] = open(sink, "a") if self._own else sink

    def write(self, rec: AttemptRecord) -> None:
        if self._fh is not None:
            self._fh.write(rec.to_json() + "\n")
            self._fh.flush()

    def close(self):
        if self._own and self._fh is not None:
            self._fh.close()


def supervise(cmd: CommandSpec, sched: TtlSchedule, unit: float = 1.0, mode: str = "restart",
              capacity: int = 0, limits: Limits = Limits(), rng: Optional[SampleStream] = None,
              log=None) -> SupervisorReport:
    """Drive ``cmd`` through the TTLs of ``sched`` (scaled by ``unit``) until
    it exits with a success code or a limit is reached.

    ``log`` is a path or text stream receiving one JSON record per attempt.
    Raises SpawnError or ClockAnomaly with the partial report attached as
    ``exc.report``.
    """
    if mode not in ("restart", "cached"):
        raise ConfigError(f"unknown supervisor mode {mode!r}")
    if not unit > 0:
        raise ConfigError("unit must be positive")
    rng = rng if rng is not None else SampleStream(0)
    clock = _Clock()
    out = _Log(log)
    report = SupervisorReport(False, EXIT_LIMITS)
    cache: list[_Child] = []
    running: Optional[_Child] = None
    births = 0
    t_begin = clock.now()

    def emit(rec):
        report.records.append(rec)
        out.write(rec)

    try:
        while True:
            now = clock.now()
            if limits.max_attempts is not None and report.attempts >= limits.max_attempts:
                report.reason = "attempt limit reached"
                return report
            remaining = None if limits.max_wall is None else limits.max_wall - (now - t_begin)
            if remaining is not None and remaining <= 0:
                report.reason = "wall-clock limit reached"
                return report
            ttl = sched.next_ttl(rng) * unit
            n = report.attempts + 1

            child = None
            if mode == "cached":
                best = [c for c in cache if c.progress < ttl]
                if best:
                    child = max(best, key=lambda c: c.progress)
                    cache.remove(child)
            latency = None
            start = clock.now()
            if child is None:
                try:
                    proc = subprocess.Popen(
                        cmd.argv(), cwd=cmd.cwd, start_new_session=True,
                        env=None if cmd.env is None else {**os.environ, **cmd.env},
                        stdin=subprocess.DEVNULL,
                    )
                except OSError as exc:
                    end = clock.now()
                    emit(AttemptRecord(n, ttl, clock.unix_ms(start), clock.unix_ms(end), SPAWN_ERROR))
                    report.exit_status = EXIT_SPAWN
                    report.reason = f"cannot start {cmd.program}: {exc}"
                    err = SpawnError(report.reason)
                    err.report = report
                    raise err from exc
                births += 1
                latency = round((clock.now() - start) * 1000.0, 3)
                child = _Child(proc, 0.0, births)
            else:
                child.resumed = True
                _signal_group(child.proc, signal.SIGCONT)
            running = child

            budget = ttl - child.progress
            capped_by_wall = remaining is not None and remaining < budget
            if capped_by_wall:
                budget = remaining
            try:
                code = child.proc.wait(timeout=budget)
            except subprocess.TimeoutExpired:
                code = None
            if code is not None:
                running = None
                end = clock.now()
                ok = code in cmd.success_codes
                run_s = child.progress + (end - start)
                emit(AttemptRecord(n, ttl, clock.unix_ms(start), clock.unix_ms(end),
                                   SUCCESS if ok else FAILED, code,
                                   round(run_s, 6) if mode == "cached" else None, latency))
                if ok:
                    report.success, report.exit_status = True, EXIT_SUCCESS
                    report.reason = "success"
                    return report
                continue

            if mode == "cached" and not capped_by_wall:
                _signal_group(child.proc, signal.SIGSTOP)
                running = None
                end = clock.now()
                child.progress = ttl
                cache.append(child)
                emit(AttemptRecord(n, ttl, clock.unix_ms(start), clock.unix_ms(end), SUSPENDED,
                                   None, ttl, latency))
                if len(cache) > capacity:
                    victim = min(cache, key=lambda c: (c.progress, c.birth))
                    cache.remove(victim)
                    _terminate(victim.proc, 0.0)
                continue

            code = _terminate(child.proc, limits.grace)
            running = None
            end = clock.now()
            emit(AttemptRecord(n, ttl, clock.unix_ms(start), clock.unix_ms(end),
                               RESUMED_KILLED if child.resumed else KILLED, code,
                               ttl if mode == "cached" else None, latency))
    except ClockAnomaly as exc:
        exc.report = report
        raise
    finally:
        if running is not None:
            _terminate(running.proc, 0.0)
        for c in cache:
            _terminate(c.proc, 0.0)
        cache.clear()
        out.close()
