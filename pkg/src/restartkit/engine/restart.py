"""Stop/restart and suspend-cache simulators in virtual time.

These are the reference loops: one TTL, one draw, one comparison at a time.
``engine.fast`` provides samplers with the same law for large benchmarks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from ..dist import RuntimeDistribution
from ..rng import SampleStream
from ..strategy import TtlSchedule


@dataclass(frozen=True)
class Caps:
    max_attempts: Optional[int] = None
    max_total_work: Optional[float] = None

    def __post_init__(self):
        if self.max_attempts is not None and self.max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        if self.max_total_work is not None and not self.max_total_work > 0:
            raise ValueError("max_total_work must be positive")

    @property
    def unbounded(self) -> bool:
        return self.max_attempts is None and self.max_total_work is None

    @property
    def attempts_limit(self) -> float:
        return math.inf if self.max_attempts is None else self.max_attempts

    @property
    def work_limit(self) -> float:
        return math.inf if self.max_total_work is None else self.max_total_work


NO_CAPS = Caps()


@dataclass(frozen=True)
class SimOutcome:
    """Result of one simulated trial.

    ``wall_time`` is the global clock at the end of the trial; for the
    sequential models it equals ``total_work``.
    """

    total_work: float
    attempts: int
    success_attempt: Optional[int]
    wall_time: float
    censored: bool


@dataclass
class RunInstance:
    sampled_x: float
    progress: float = 0.0
    birth: int = 0
    attempt: int = 0


def _check_runnable(dist: RuntimeDistribution, caps: Caps) -> None:
    if caps.unbounded and dist.prob_finite <= 0.0:
        raise ValueError("distribution never terminates; set a cap")


def run_restart(dist: RuntimeDistribution, sched: TtlSchedule, rng: SampleStream,
                caps: Caps = NO_CAPS) -> SimOutcome:
    """Kill-and-restart simulation driven by ``sched``."""
    _check_runnable(dist, caps)
    work, attempts = 0.0, 0
    while True:
        if attempts >= caps.attempts_limit:
            return SimOutcome(work, attempts, None, work, True)
        ttl = sched.next_ttl(rng)
        x = dist.sample(rng)
        attempts += 1
        done = x <= ttl
        cost = x if done else ttl
        if work + cost > caps.work_limit:
            w = caps.max_total_work
            return SimOutcome(w, attempts, None, w, True)
        work += cost
        if done:
            return SimOutcome(work, attempts, attempts, work, False)


def run_cached(dist: RuntimeDistribution, sched: TtlSchedule, capacity: int,
               rng: SampleStream, caps: Caps = NO_CAPS) -> SimOutcome:
    """Restart simulation that suspends expired runs instead of killing them.

    For each TTL t the suspended run with the largest progress strictly below
    t is resumed; otherwise a fresh run starts. Overflow evicts the run with
    the smallest progress (oldest first on ties). ``attempts`` counts fresh
    starts, and ``max_attempts`` caps them.
    """
    if capacity < 0:
        raise ValueError("capacity must be nonnegative")
    _check_runnable(dist, caps)
    cache: list[RunInstance] = []
    work, fresh, births = 0.0, 0, 0
    while True:
        ttl = sched.next_ttl(rng)
        best = None
        for inst in cache:
            if inst.progress < ttl and (best is None or inst.progress > best.progress):
                best = inst
        if best is not None:
            cache.remove(best)
            inst = best
        else:
            if fresh >= caps.attempts_limit:
                return SimOutcome(work, fresh, None, work, True)
            fresh += 1
            births += 1
            inst = RunInstance(dist.sample(rng), 0.0, births, fresh)
        done = inst.sampled_x <= ttl
        cost = (inst.sampled_x if done else ttl) - inst.progress
        if work + cost > caps.work_limit:
            w = caps.max_total_work
            return SimOutcome(w, fresh, None, w, True)
        work += cost
        if done:
            return SimOutcome(work, fresh, inst.attempt, work, False)
        inst.progress = ttl
        cache.append(inst)
        if len(cache) > capacity:
            victim = min(cache, key=lambda r: (r.progress, r.birth))
            cache.remove(victim)
