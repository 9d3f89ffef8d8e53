"""Restart samplers with the same law as ``run_restart``, without the per-attempt loop.

Deterministic schedules: attempt k fails independently with probability
1 - F(t_k), so the index of the first success is found by inverting the
cumulative hazard at one Exp(1) draw. IID integer schedules on a bounded
distribution: attempts are exchangeable, so the number of attempts is
geometric and the wasted work is a sum of conditionally independent TTLs.

Outcomes agree in distribution with the reference loop, not draw for draw.
"""
from __future__ import annotations

import math

import numpy as np

from ..dist import RuntimeDistribution
from ..rng import SampleStream
from ..strategy import IidIntegerSchedule, TtlSchedule
from .restart import NO_CAPS, Caps, SimOutcome, run_restart

_MAX_TABLE = 1 << 26


class LoopSampler:
    def __init__(self, dist: RuntimeDistribution, sched: TtlSchedule):
        self.dist, self.proto = dist, sched

    def run(self, rng: SampleStream, caps: Caps = NO_CAPS) -> SimOutcome:
        return run_restart(self.dist, self.proto.clone(), rng, caps)


def _censor_at(cum: np.ndarray, limit: float) -> int:
    """1-based index of the first cumulative total exceeding ``limit`` (0 if none)."""
    k = int(np.searchsorted(cum, limit, side="right"))
    return k + 1 if k < len(cum) else 0


class TableSampler:
    """Deterministic schedules: shared TTL / work / hazard tables grown on demand."""

    def __init__(self, dist: RuntimeDistribution, sched: TtlSchedule):
        if not sched.deterministic:
            raise TypeError("table sampler needs a deterministic schedule")
        self.dist, self.proto = dist, sched
        self.ttl = np.zeros(0)
        self.work = np.zeros(0)      # work after k failed attempts, inclusive
        self.hazard = np.zeros(0)    # -log P[first k attempts all fail]
        self._grow(1024)

    def _grow(self, n: int) -> None:
        if n > _MAX_TABLE:
            raise RuntimeError("restart table too large; set a cap")
        ttl = np.asarray(self.proto.prefix(n), dtype=float)
        uniq, inv = np.unique(ttl, return_inverse=True)
        q = np.array([self.dist.cdf(float(t)) for t in uniq])[inv]
        with np.errstate(divide="ignore", over="ignore"):
            h = -np.log1p(-q)
            self.work = np.cumsum(ttl)
        self.ttl = ttl
        self.hazard = np.cumsum(h)

    def _ensure(self, pred) -> None:
        while not pred():
            self._grow(2 * len(self.ttl))

    def run(self, rng: SampleStream, caps: Caps = NO_CAPS) -> SimOutcome:
        a_cap, w_cap = caps.attempts_limit, caps.work_limit
        e = rng.exponential()

        def covered():
            n = len(self.ttl)
            return self.hazard[-1] >= e or n >= a_cap or self.work[-1] > w_cap

        if caps.unbounded and self.dist.prob_finite <= 0.0:
            raise ValueError("distribution never terminates; set a cap")
        self._ensure(covered)
        k = int(np.searchsorted(self.hazard, e, side="left")) + 1
        if k > len(self.ttl):
            k = math.inf
        if k > a_cap or 0 < _censor_at(self.work, w_cap) < k:
            # stopped by a cap before the successful attempt
            n = int(min(a_cap, len(self.ttl)))
            kc = _censor_at(self.work[:n], w_cap)
            if kc:
                return SimOutcome(caps.max_total_work, kc, None, caps.max_total_work, True)
            w = float(self.work[n - 1])
            return SimOutcome(w, n, None, w, True)
        before = float(self.work[k - 2]) if k > 1 else 0.0
        x = self.dist.sample_below(rng, float(self.ttl[k - 1]))
        total = before + x
        if total > w_cap:
            return SimOutcome(caps.max_total_work, k, None, caps.max_total_work, True)
        return SimOutcome(total, k, k, total, False)


class IidSampler:
    """IID integer TTL laws on distributions with bounded finite support.

    TTL values r >= r_split all satisfy unit*r >= max_time, so they succeed
    with the same probability and are lumped into one tail class.
    """

    def __init__(self, dist: RuntimeDistribution, sched: IidIntegerSchedule):
        xmax = dist.max_time
        if not math.isfinite(xmax):
            raise TypeError("iid sampler needs bounded finite support")
        self.dist, self.proto = dist, sched
        u = sched.unit
        r_split = max(1, math.ceil(xmax / u))
        while u * r_split < xmax:
            r_split += 1
        while r_split > 1 and u * (r_split - 1) >= xmax:
            r_split -= 1
        if r_split > 1 << 22:
            raise TypeError("too many TTL classes for the iid sampler")
        self.unit, self.r_split = u, r_split
        r = np.arange(1, r_split, dtype=np.int64)
        pr = np.asarray(sched.pmf(r), dtype=float)
        q = np.array([dist.cdf(u * float(v)) for v in r])
        self.head_r = r
        head_s, head_f = pr * q, pr * (1.0 - q)
        tail = sched.tail(r_split)
        pf = dist.prob_finite
        p_hs, p_hf = head_s.sum(), head_f.sum()
        p_ts, p_tf = tail * pf, tail * (1.0 - pf)
        self.p_success = p_hs + p_ts
        self.p_fail = p_hf + p_tf
        self.frac_head_success = p_hs / self.p_success if self.p_success > 0 else 0.0
        self.frac_tail_fail = p_tf / self.p_fail if self.p_fail > 0 else 0.0
        self.head_fail_p = head_f / p_hf if p_hf > 0 else None
        self.head_succ_cdf = np.cumsum(head_s) / p_hs if p_hs > 0 else None

    def _failures(self, gen, n: int, rng: SampleStream) -> tuple[np.ndarray, np.ndarray]:
        n_tail = rng.binomial(n, self.frac_tail_fail)
        n_head = n - n_tail
        counts = gen.multinomial(n_head, self.head_fail_p) if n_head else np.zeros(0, dtype=np.int64)
        tail = self.proto.sample_at_least(gen, self.r_split, n_tail) if n_tail else np.zeros(0)
        return counts, tail

    def _order(self, gen, counts, tail) -> np.ndarray:
        vals = np.concatenate([np.repeat(self.head_r[: len(counts)], counts).astype(float), tail])
        gen.shuffle(vals)
        return vals * self.unit

    def run(self, rng: SampleStream, caps: Caps = NO_CAPS) -> SimOutcome:
        gen = rng.gen
        if self.p_success <= 0.0:
            if caps.unbounded:
                raise ValueError("no TTL can succeed; set a cap")
            k = math.inf
        else:
            k = rng.geometric(self.p_success)
        a_cap, w_cap = caps.attempts_limit, caps.work_limit
        success = k <= a_cap
        n_fail = int(k - 1 if success else a_cap)
        if not success and not math.isfinite(a_cap):
            # only the work cap can end this trial; draw failures in blocks
            w, n = 0.0, 0
            while True:
                counts, tail = self._failures(gen, 4096, rng)
                vals = self._order(gen, counts, tail)
                kc = _censor_at(w + np.cumsum(vals), w_cap)
                if kc:
                    return SimOutcome(caps.max_total_work, n + kc, None, caps.max_total_work, True)
                w += float(vals.sum())
                n += len(vals)
        counts, tail = self._failures(gen, n_fail, rng)
        wasted = self.unit * (float(counts @ self.head_r[: len(counts)]) if len(counts) else 0.0)
        wasted += self.unit * float(tail.sum())
        if success:
            if gen.random() < self.frac_head_success:
                idx = int(np.searchsorted(self.head_succ_cdf, gen.random(), side="right"))
                r = int(self.head_r[min(idx, len(self.head_r) - 1)])
                x = self.dist.sample_below(rng, self.unit * r)
            else:
                x = self.dist.sample_finite(rng)
            total = wasted + x
        else:
            x, total = 0.0, wasted
        if total > w_cap:
            vals = self._order(gen, counts, tail)
            cum = np.cumsum(vals)
            kc = _censor_at(cum, w_cap)
            kc = kc if kc else n_fail + 1
            return SimOutcome(caps.max_total_work, kc, None, caps.max_total_work, True)
        if not success:
            return SimOutcome(total, n_fail, None, total, True)
        return SimOutcome(total, k, k, total, False)


def compile_restart(dist: RuntimeDistribution, sched: TtlSchedule):
    """Pick the fastest exact sampler for this (distribution, schedule) pair."""
    if sched.deterministic:
        return TableSampler(dist, sched)
    if isinstance(sched, IidIntegerSchedule) and math.isfinite(dist.max_time):
        try:
            return IidSampler(dist, sched)
        except TypeError:
            pass
    return LoopSampler(dist, sched)
