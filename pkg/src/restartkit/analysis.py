"""Full-information quantities of a runtime distribution.

``expected_ttl_cost(d, t)`` is the mean running time of the simulation that
restarts with a fixed threshold t; ``proxy_cost`` is its upper bound t/F(t).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .dist import (
    DiscreteFinite,
    GeometricSeconds,
    RuntimeDistribution,
    StepOrForever,
    UniformInterval,
    Zeta2,
)
from .errors import NoFiniteMass

TIE_RTOL = 1e-12
UNIFORM_GRID = 1024


@dataclass(frozen=True)
class Profile:
    inv_rho: float
    threshold: float
    work: float


@dataclass(frozen=True)
class OptimalPolicy:
    delta: float
    expected_cost: float


def expected_ttl_cost(dist: RuntimeDistribution, t: float) -> float:
    p = dist._check_conditional(t)
    return dist.cond_expectation_below(t) + (1.0 - p) / p * t


def proxy_cost(dist: RuntimeDistribution, t: float) -> float:
    return t / dist._check_conditional(t)


def truncated_mean(dist: RuntimeDistribution, t: float) -> float:
    """E[min(X, t)]; a lower bound on f(t) that never decreases in t."""
    p = dist.cdf(t)
    below = dist.cond_expectation_below(t) * p if p > 0 else 0.0
    return below + (1.0 - p) * t


def _finite_candidates(dist) -> list[float] | None:
    if isinstance(dist, DiscreteFinite):
        return [t for t, _ in dist.atoms]
    if isinstance(dist, StepOrForever):
        return [dist.run_time]
    if isinstance(dist, UniformInterval):
        lo, hi = dist.lo, dist.hi
        grid = [lo + (hi - lo) * k / UNIFORM_GRID for k in range(1, UNIFORM_GRID)]
        return [t for t in grid if t > lo] + [hi]
    return None


def _argmin(values: Iterable[tuple[float, float]]) -> tuple[float, float]:
    best_t, best = None, math.inf
    for t, v in values:
        if v < best * (1.0 - TIE_RTOL):
            best_t, best = t, v
    return best_t, best


def _integer_scan(dist, cost, stop, horizon: int) -> Iterator[tuple[float, float]]:
    """Integer thresholds from the support minimum on, until ``stop(t, best)``."""
    best = math.inf
    t = max(1, math.ceil(dist.min_time))
    last = t + horizon
    while t <= last:
        if dist.cdf(t) > 0:
            v = cost(dist, t)
            best = min(best, v)
            yield float(t), v
        if stop(t, best):
            return
        t += 1


def _require_mass(dist):
    if dist.prob_finite <= 0.0:
        raise NoFiniteMass(f"{dist!r} has no mass on finite times")


def optimal_threshold(dist: RuntimeDistribution, horizon: int = 10**6) -> OptimalPolicy:
    """Threshold minimizing f, smallest first on ties.

    For the integer families the scan ends once E[min(X, t)], which bounds
    f(t') from below for every t' >= t, reaches the best value found.
    """
    _require_mass(dist)
    cands = _finite_candidates(dist)
    if cands is not None:
        t, v = _argmin((t, expected_ttl_cost(dist, t)) for t in cands if dist.cdf(t) > 0)
    elif isinstance(dist, (Zeta2, GeometricSeconds)):
        stop = lambda t, best: truncated_mean(dist, t) >= best * (1.0 - TIE_RTOL)
        t, v = _argmin(_integer_scan(dist, expected_ttl_cost, stop, horizon))
    else:
        raise TypeError(f"no candidate set for {type(dist).__name__}")
    return OptimalPolicy(t, v)


def profile_of(dist: RuntimeDistribution, horizon: int = 10**6) -> Profile:
    """Profile (1/rho, t*) where t* minimizes the proxy cost R(t) = t/F(t)."""
    _require_mass(dist)
    cands = _finite_candidates(dist)
    if cands is not None:
        t, _ = _argmin((t, proxy_cost(dist, t)) for t in cands if dist.cdf(t) > 0)
    elif isinstance(dist, (Zeta2, GeometricSeconds)):
        # R(t) >= t
        t, _ = _argmin(_integer_scan(dist, proxy_cost, lambda t, best: t + 1 >= best, horizon))
    else:
        raise TypeError(f"no candidate set for {type(dist).__name__}")
    inv_rho = 1.0 / dist.cdf(t)
    return Profile(inv_rho, t, t * inv_rho)


def alpha_median(dist: RuntimeDistribution, alpha: float) -> float:
    # inf{t : P[X < t] <= alpha, P[X > t] <= 1 - alpha} is the lower alpha-quantile
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    return dist.quantile(alpha)


def front(ttls: Sequence[float]) -> list[float]:
    return sorted(ttls, reverse=True)


def dominates_hyperbola(front_: Sequence[float], work: float) -> bool:
    n = min(len(front_), math.floor(work))
    heights = np.asarray(front_[:n], dtype=float)
    xs = np.arange(1, n + 1, dtype=float)
    return bool(np.all(heights >= work / xs))
