"""Wide search in virtual time, and its conversion to the restart model.

The global clock is an integer tick; copy i has received floor(t * alpha_i)
seconds by tick t and needs ceil(x_i) of them. Only copies with a finite draw
can ever finish, so those are located directly by geometric skips instead of
drawing every copy.
"""
from __future__ import annotations

import heapq
import math

import numpy as np

from ..dist import RuntimeDistribution
from ..rng import SampleStream
from ..strategy import SpeedSchedule
from .restart import NO_CAPS, Caps, SimOutcome, _check_runnable


class FiniteCopies:
    """Indices and draws of the copies whose running time is finite, in order."""

    def __init__(self, dist: RuntimeDistribution, rng: SampleStream):
        self.dist, self.rng = dist, rng
        self.pf = dist.prob_finite
        self.index = 0

    def __iter__(self):
        return self

    def __next__(self) -> tuple[int, float]:
        if self.pf <= 0.0:
            raise StopIteration
        self.index += self.rng.geometric(self.pf)
        return self.index, self.dist.sample_finite(self.rng)


def _slots(x: float) -> int:
    return max(1, math.ceil(x))


def _first_infeasible(ok, lo: int, hi: int | None) -> int:
    """Smallest t in (lo, hi] with ok(t) false, given ok(lo) true and ok monotone."""
    if hi is None:
        hi = max(2 * lo, 1)
        while ok(hi):
            lo, hi = hi, 2 * hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return hi


def _censor(speeds: SpeedSchedule, caps: Caps, work_fn, count_fn, t_end: float, final_over_work: bool):
    """Outcome at the last tick before t_end where neither cap is exceeded."""
    a_cap, w_cap = caps.attempts_limit, caps.work_limit

    def ok(t):
        return count_fn(t) <= a_cap and work_fn(t) <= w_cap

    hi = _first_infeasible(ok, 0, None if not math.isfinite(t_end) else int(t_end))
    t = hi - 1
    binds_work = work_fn(hi) > w_cap if hi < t_end else final_over_work
    work = caps.max_total_work if binds_work else float(work_fn(t))
    return SimOutcome(work, max(1, count_fn(t)), None, float(t), True)


def _search(copies, earliest, finish, speeds):
    """Lowest-index copy with the smallest finish tick; pruned by a lower bound."""
    best_t, win, seen = math.inf, None, []
    for i, x in copies:
        speeds.ensure_valid(i)
        if earliest(i) >= best_t:
            break
        t = finish(i, x)
        seen.append((i, x))
        if t < best_t:
            best_t, win = t, (i, x)
    return best_t, win, seen


def run_wide(dist: RuntimeDistribution, speeds: SpeedSchedule, rng: SampleStream,
             caps: Caps = NO_CAPS) -> SimOutcome:
    _check_runnable(dist, caps)
    n_min = _slots(dist.min_time) if dist.prob_finite > 0 else 1
    best_t, win, seen = _search(
        FiniteCopies(dist, rng),
        lambda i: speeds.finish_time(n_min, i),
        lambda i, x: speeds.finish_time(_slots(x), i),
        speeds,
    )
    if win is None:
        return _censor(speeds, caps, speeds.work_at, speeds.count_at, math.inf, False)
    n = speeds.count_at(best_t)
    speeds.ensure_valid(n)
    work = speeds.work_at(best_t)
    for j, x in seen:
        if j <= n:
            work -= max(0, speeds.progress(best_t, j) - _slots(x))
    if n > caps.attempts_limit or work > caps.work_limit:
        # every copy is still running before best_t, so the work there is W(t)
        return _censor(speeds, caps, speeds.work_at, speeds.count_at, best_t,
                       work > caps.work_limit)
    return SimOutcome(float(work), n, win[0], float(best_t), False)


# doubling conversion: instance k of a copy has budget 2^k and is started when
# the copy's virtual progress reaches 1 (k = 0) or 2^(k-1) + 1


def _start_progress(k: int) -> int:
    return 1 if k == 0 else 2 ** (k - 1) + 1


def _instances_for(n: int) -> int:
    """Index of the first instance whose budget covers n seconds."""
    return (n - 1).bit_length()


def _executed(progress: np.ndarray) -> tuple[float, int]:
    """Budget sum and instance count over copies with the given progress."""
    p = np.asarray(progress, dtype=np.int64)
    p = p[p >= 1]
    if p.size == 0:
        return 0.0, 0
    bl = np.frexp((p - 1).astype(float))[1]
    return float((np.ldexp(1.0, bl + 1) - 1.0).sum()), int((bl + 1).sum())


def run_wide_as_restart(dist: RuntimeDistribution, speeds: SpeedSchedule, rng: SampleStream,
                        caps: Caps = NO_CAPS, fresh_draws: bool = False) -> SimOutcome:
    """Wide search where each resumption past accumulated time t is replaced by
    a fresh run with budget 2t.

    By default a copy's replacement runs reuse that copy's draw, which makes
    the outcome pathwise comparable with ``run_wide`` on the same seed.
    ``fresh_draws=True`` gives every run its own draw (event-driven).
    """
    _check_runnable(dist, caps)
    if fresh_draws:
        return _war_events(dist, speeds, rng, caps)
    k_min = _instances_for(_slots(dist.min_time)) if dist.prob_finite > 0 else 0

    def finish(i, x):
        return speeds.finish_time(_start_progress(_instances_for(_slots(x))), i)

    best_t, win, _ = _search(
        FiniteCopies(dist, rng),
        lambda i: speeds.finish_time(_start_progress(k_min), i),
        finish,
        speeds,
    )

    def totals(t):
        # everything started up to and including tick t, no success yet
        return _executed(speeds.progress_array(t, speeds.count_at(t)))

    work_fn = lambda t: totals(t)[0]
    count_fn = lambda t: totals(t)[1]
    if win is None:
        return _censor(speeds, caps, work_fn, count_fn, math.inf, False)
    w, x = win
    k = _instances_for(_slots(x))
    n_after = speeds.count_at(best_t - 1)
    speeds.ensure_valid(speeds.count_at(best_t))
    lo_work, lo_count = _executed(speeds.progress_array(best_t, w - 1))
    hi = speeds.progress_array(best_t - 1, n_after)[w:] if n_after > w else np.zeros(0)
    hi_work, hi_count = _executed(hi)
    work = lo_work + hi_work + (2.0**k - 1.0) + x
    count = lo_count + hi_count + k + 1
    if count > caps.attempts_limit or work > caps.work_limit:
        return _censor(speeds, caps, work_fn, count_fn, best_t, work > caps.work_limit)
    return SimOutcome(work, count, count, float(best_t), False)


def _war_events(dist, speeds, rng, caps) -> SimOutcome:
    heap = [(speeds.finish_time(1, 1), 1, 0)]
    work, starts = 0.0, 0
    while heap:
        t, i, k = heapq.heappop(heap)
        if k == 0:
            speeds.ensure_valid(i + 1)
            heapq.heappush(heap, (speeds.finish_time(1, i + 1), i + 1, 0))
        if starts >= caps.attempts_limit:
            return SimOutcome(work, starts, None, float(t), True)
        budget = 2.0**k
        x = dist.sample(rng)
        starts += 1
        done = x <= budget
        cost = x if done else budget
        if work + cost > caps.work_limit:
            return SimOutcome(caps.max_total_work, starts, None, float(t), True)
        work += cost
        if done:
            return SimOutcome(work, starts, starts, float(t), False)
        heapq.heappush(heap, (speeds.finish_time(_start_progress(k + 1), i), i, k + 1))
    raise AssertionError("event queue cannot drain")
