"""Running-time distributions for a Las Vegas algorithm.

Every model exposes the same surface: ``cdf``, ``cond_expectation_below``,
``sample`` (and conditional variants used by the fast engines), the finite
mass ``prob_finite`` and the support bounds ``min_time`` / ``max_time``.
A run that never terminates is represented by ``FOREVER`` (``math.inf``);
engines compare against it explicitly and never add it to a work total.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import special

from .errors import ConfigError, UndefinedConditional, Unbounded
from .rng import SampleStream

FOREVER = math.inf

ZETA2_C = 6.0 / math.pi**2
_EULER_GAMMA = 0.5772156649015329
_SMALL = 64
# exact prefix sums for small arguments; index n holds sum_{i<=n} 1/i^2
_SQ_PREFIX = [0.0] + [math.fsum(1.0 / (i * i) for i in range(1, n + 1)) for n in range(1, _SMALL + 1)]
_HARM_PREFIX = [0.0] + [math.fsum(1.0 / i for i in range(1, n + 1)) for n in range(1, _SMALL + 1)]


def is_forever(x: float) -> bool:
    return x == FOREVER


class RuntimeDistribution:
    """Base class; concrete models are frozen dataclasses."""

    kind: str = ""

    # -- queries -----------------------------------------------------------
    def cdf(self, t: float) -> float:
        raise NotImplementedError

    def cond_expectation_below(self, t: float) -> float:
        """E[X | X <= t]."""
        raise NotImplementedError

    def quantile(self, a: float) -> float:
        """inf{t : cdf(t) >= a}; raises Unbounded when the finite mass is below a."""
        raise NotImplementedError

    @property
    def prob_finite(self) -> float:
        return 1.0

    @property
    def min_time(self) -> float:
        raise NotImplementedError

    @property
    def max_time(self) -> float:
        """Supremum of the finite support (inf when unbounded)."""
        raise NotImplementedError

    # -- sampling ----------------------------------------------------------
    def sample(self, rng: SampleStream) -> float:
        raise NotImplementedError

    def sample_below(self, rng: SampleStream, t: float) -> float:
        """Draw from X conditioned on X <= t (requires cdf(t) > 0)."""
        raise NotImplementedError

    def sample_finite(self, rng: SampleStream) -> float:
        return self.sample_below(rng, self.max_time)

    # -- config ------------------------------------------------------------
    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def params(self) -> tuple[Any, Any]:
        """Two headline parameters, used as CSV columns."""
        return (None, None)

    def _check_conditional(self, t: float) -> float:
        p = self.cdf(t)
        if p <= 0.0:
            raise UndefinedConditional(f"P[X <= {t}] = 0 for {self!r}")
        return p


@dataclass(frozen=True)
class DiscreteFinite(RuntimeDistribution):
    """Finitely many atoms plus an optional mass at +inf."""

    atoms: tuple = ()
    prob_forever: float = 0.0
    _times: tuple = field(init=False, repr=False, compare=False, default=())
    _cum: tuple = field(init=False, repr=False, compare=False, default=())
    _cumwork: tuple = field(init=False, repr=False, compare=False, default=())

    kind = "discrete"

    def __post_init__(self):
        atoms = tuple((float(t), float(p)) for t, p in self.atoms)
        if not atoms:
            raise ValueError("DiscreteFinite needs at least one atom")
        times = [t for t, _ in atoms]
        if any(t <= 0 for t in times):
            raise ValueError("atom times must be positive")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("atom times must be strictly increasing")
        probs = [p for _, p in atoms]
        if any(not (0.0 < p <= 1.0) for p in probs):
            raise ValueError("atom probabilities must lie in (0, 1]")
        if not (0.0 <= self.prob_forever < 1.0):
            raise ValueError("prob_forever must lie in [0, 1)")
        total = math.fsum(probs) + self.prob_forever
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        cum, cw, acc, accw = [], [], 0.0, 0.0
        for t, p in atoms:
            acc += p
            accw += p * t
            cum.append(acc)
            cw.append(accw)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "prob_forever", float(self.prob_forever))
        object.__setattr__(self, "_times", tuple(times))
        object.__setattr__(self, "_cum", tuple(cum))
        object.__setattr__(self, "_cumwork", tuple(cw))

    def _count_below(self, t: float) -> int:
        return bisect.bisect_right(self._times, t)

    def cdf(self, t):
        k = self._count_below(t)
        return self._cum[k - 1] if k else 0.0

    def cond_expectation_below(self, t):
        p = self._check_conditional(t)
        return self._cumwork[self._count_below(t) - 1] / p

    def quantile(self, a):
        k = bisect.bisect_left(self._cum, a - 1e-15)
        if k >= len(self._times):
            raise Unbounded(f"finite mass {self._cum[-1]} < {a}")
        return self._times[k]

    @property
    def prob_finite(self):
        return 1.0 - self.prob_forever

    @property
    def min_time(self):
        return self._times[0]

    @property
    def max_time(self):
        return self._times[-1]

    def _pick(self, u: float) -> float:
        k = bisect.bisect_right(self._cum, u)
        return self._times[k] if k < len(self._times) else FOREVER

    def sample(self, rng):
        return self._pick(rng.random())

    def sample_below(self, rng, t):
        p = self._check_conditional(t)
        k = self._count_below(t)
        return self._times[min(bisect.bisect_right(self._cum, rng.random() * p), k - 1)]

    def to_dict(self):
        return {"kind": self.kind, "atoms": [list(a) for a in self.atoms],
                "prob_forever": self.prob_forever}

    def params(self):
        return (len(self.atoms), self.prob_forever)


def zeta2_tail(n: int) -> float:
    """P[X >= n] for X ~ zeta(2)."""
    if n <= 1:
        return 1.0
    if n <= _SMALL:
        return 1.0 - ZETA2_C * _SQ_PREFIX[n - 1]
    return ZETA2_C * _hurwitz2(float(n))


def _hurwitz2(n):
    """sum_{k>=0} 1/(n+k)^2 for n > 64 by Euler-Maclaurin; accurate to an ulp there."""
    r = 1.0 / n
    r2 = r * r
    return r + r2 * (0.5 + r * (1 / 6 + r2 * (-1 / 30 + r2 * (1 / 42 + r2 * (-1 / 30 + r2 * (5 / 66))))))


def _zeta2_invert(v: float, r0: int = 1) -> int:
    """Smallest t >= r0 with P[X > t] <= v, for v in (0, P[X >= r0]].

    The tail bounds c/(t+1) <= P[X > t] <= c/t pin the answer to
    [c/v - 1, c/v], so at most a couple of exact tail evaluations are needed.
    """
    t = max(r0, math.ceil(ZETA2_C / v - 1.0))
    while t > r0 and zeta2_tail(t) <= v:
        t -= 1
    while zeta2_tail(t + 1) > v:
        t += 1
    return t


# _NEG_TAIL_AFTER[t] = -P[X > t], increasing in t
_NEG_TAIL_AFTER = -np.array([zeta2_tail(t + 1) for t in range(_SMALL + 3)])


def zeta2_sample_array(gen: np.random.Generator, size: int, r0: int = 1) -> np.ndarray:
    """Vectorized inversion draws of zeta(2) conditioned on X >= r0."""
    g0 = zeta2_tail(r0)
    v = g0 * (1.0 - gen.random(size))
    t = np.maximum(float(r0), np.ceil(ZETA2_C / v - 1.0))

    def tail(n):
        return ZETA2_C * _hurwitz2(n)

    # small answers come from the exact prefix table
    small = t <= _SMALL + 1
    if small.any():
        idx = np.searchsorted(_NEG_TAIL_AFTER, -v[small], side="left")
        t[small] = np.maximum(idx, r0)
    big = ~small
    if big.any():
        tb, vb = t[big], v[big]
        for _ in range(4):
            down = (tb > r0) & (tail(tb) <= vb)
            if not down.any():
                break
            tb = np.where(down, tb - 1, tb)
        for _ in range(8):
            up = tail(tb + 1) > vb
            if not up.any():
                break
            tb = np.where(up, tb + 1, tb)
        t[big] = tb
    return t


@dataclass(frozen=True)
class Zeta2(RuntimeDistribution):
    """P[X = i] = (6/pi^2) / i^2 on the positive integers."""

    kind = "zeta2"

    def cdf(self, t):
        n = math.floor(t)
        if n < 1:
            return 0.0
        if n <= _SMALL:
            return ZETA2_C * _SQ_PREFIX[n]
        return 1.0 - zeta2_tail(n + 1)

    def cond_expectation_below(self, t):
        p = self._check_conditional(t)
        n = math.floor(t)
        h = _HARM_PREFIX[n] if n <= _SMALL else float(special.digamma(n + 1.0)) + _EULER_GAMMA
        return ZETA2_C * h / p

    def quantile(self, a):
        if a <= 0:
            return 1.0
        return float(_zeta2_invert(1.0 - a)) if a < 1 else _raise_unbounded(a)

    @property
    def min_time(self):
        return 1.0

    @property
    def max_time(self):
        return math.inf

    def sample(self, rng):
        return float(_zeta2_invert(rng.open_unit()))

    def sample_at_least(self, rng: SampleStream, r0: int) -> float:
        return float(_zeta2_invert(zeta2_tail(r0) * rng.open_unit(), r0))

    def sample_below(self, rng, t):
        p = self._check_conditional(t)
        n = math.floor(t)
        # v uniform on [1 - p, 1): the answer is <= n by construction
        v = 1.0 - p * rng.random()
        return float(min(_zeta2_invert(v), n))

    def sample_finite(self, rng):
        return self.sample(rng)

    def to_dict(self):
        return {"kind": self.kind}


def _raise_unbounded(a):
    raise Unbounded(f"no finite quantile at level {a}")


@dataclass(frozen=True)
class StepOrForever(RuntimeDistribution):
    """X = run_time with probability success_prob, otherwise +inf."""

    run_time: float = 1.0
    success_prob: float = 1.0

    kind = "step_or_forever"

    def __post_init__(self):
        if not self.run_time > 0:
            raise ValueError("run_time must be positive")
        if not (0.0 < self.success_prob <= 1.0):
            raise ValueError("success_prob must lie in (0, 1]")

    def cdf(self, t):
        return self.success_prob if t >= self.run_time else 0.0

    def cond_expectation_below(self, t):
        self._check_conditional(t)
        return float(self.run_time)

    def quantile(self, a):
        if a > self.success_prob:
            raise Unbounded(f"finite mass {self.success_prob} < {a}")
        return float(self.run_time)

    @property
    def prob_finite(self):
        return self.success_prob

    @property
    def min_time(self):
        return float(self.run_time)

    @property
    def max_time(self):
        return float(self.run_time)

    def sample(self, rng):
        return float(self.run_time) if rng.random() < self.success_prob else FOREVER

    def sample_below(self, rng, t):
        self._check_conditional(t)
        return float(self.run_time)

    def to_dict(self):
        return {"kind": self.kind, "run_time": self.run_time, "success_prob": self.success_prob}

    def params(self):
        return (self.run_time, self.success_prob)


@dataclass(frozen=True)
class UniformInterval(RuntimeDistribution):
    lo: float = 0.0
    hi: float = 1.0

    kind = "uniform"

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi):
            raise ValueError("need 0 <= lo < hi")

    def cdf(self, t):
        if t <= self.lo:
            return 0.0
        if t >= self.hi:
            return 1.0
        return (t - self.lo) / (self.hi - self.lo)

    def cond_expectation_below(self, t):
        self._check_conditional(t)
        return 0.5 * (self.lo + min(t, self.hi))

    def quantile(self, a):
        return self.lo + min(max(a, 0.0), 1.0) * (self.hi - self.lo)

    @property
    def min_time(self):
        return float(self.lo)

    @property
    def max_time(self):
        return float(self.hi)

    def sample(self, rng):
        return self.lo + rng.random() * (self.hi - self.lo)

    def sample_below(self, rng, t):
        self._check_conditional(t)
        return self.lo + rng.random() * (min(t, self.hi) - self.lo)

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}

    def params(self):
        return (self.lo, self.hi)


@dataclass(frozen=True)
class GeometricSeconds(RuntimeDistribution):
    """X = k with probability p (1-p)^(k-1), k = 1, 2, ..."""

    p: float = 0.5

    kind = "geometric"

    def __post_init__(self):
        if not (0.0 < self.p <= 1.0):
            raise ValueError("p must lie in (0, 1]")

    def _fail_pow(self, n: int) -> float:
        """(1-p)^n."""
        return 0.0 if self.p == 1.0 else math.exp(n * math.log1p(-self.p))

    def cdf(self, t):
        n = math.floor(t)
        if n < 1:
            return 0.0
        return 1.0 if self.p == 1.0 else -math.expm1(n * math.log1p(-self.p))

    def cond_expectation_below(self, t):
        f = self._check_conditional(t)
        n = math.floor(t)
        return 1.0 / self.p - n * self._fail_pow(n) / f

    def quantile(self, a):
        if a >= 1.0:
            return _raise_unbounded(a) if self.p < 1.0 else 1.0
        if self.p == 1.0 or a <= 0.0:
            return 1.0
        k = max(1, math.ceil(math.log1p(-a) / math.log1p(-self.p) - 1e-12))
        while self.cdf(k) < a:
            k += 1
        while k > 1 and self.cdf(k - 1) >= a:
            k -= 1
        return float(k)

    @property
    def mean(self) -> float:
        return 1.0 / self.p

    @property
    def min_time(self):
        return 1.0

    @property
    def max_time(self):
        return math.inf if self.p < 1.0 else 1.0

    def sample(self, rng):
        return float(rng.geometric(self.p))

    def sample_below(self, rng, t):
        f = self._check_conditional(t)
        n = math.floor(t)
        if self.p == 1.0:
            return 1.0
        u = rng.random() * f
        k = max(1, math.ceil(math.log1p(-u) / math.log1p(-self.p)))
        return float(min(k, n))

    def sample_finite(self, rng):
        return self.sample(rng)

    def to_dict(self):
        return {"kind": self.kind, "p": self.p}

    def params(self):
        return (self.p, None)


_KINDS = {
    "discrete": DiscreteFinite,
    "zeta2": Zeta2,
    "step_or_forever": StepOrForever,
    "uniform": UniformInterval,
    "geometric": GeometricSeconds,
}
_FIELDS = {
    "discrete": {"atoms", "prob_forever"},
    "zeta2": set(),
    "step_or_forever": {"run_time", "success_prob"},
    "uniform": {"lo", "hi"},
    "geometric": {"p"},
}


def from_dict(spec: dict[str, Any]) -> RuntimeDistribution:
    """Build a distribution from a tagged object such as
    ``{"kind": "step_or_forever", "run_time": 1.0, "success_prob": 0.01}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("distribution spec must be an object with a 'kind' key")
    kind = spec["kind"]
    if kind not in _KINDS:
        raise ConfigError(f"unknown distribution kind {kind!r}")
    extra = set(spec) - {"kind"} - _FIELDS[kind]
    if extra:
        raise ConfigError(f"unknown key(s) for {kind}: {', '.join(sorted(extra))}")
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    if kind == "discrete":
        kwargs["atoms"] = tuple(tuple(a) for a in kwargs.get("atoms", ()))
    try:
        return _KINDS[kind](**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind} distribution: {exc}") from exc


def zeta2_tail_bounds_check(i: int) -> tuple[float, float, float]:
    """Return ``(6/(pi^2 i), P[X >= i], 6/(pi^2 (i-1)))`` for X ~ zeta(2)."""
    if i < 2:
        raise ValueError("i must be at least 2")
    lower, exact, upper = ZETA2_C / i, zeta2_tail(i), ZETA2_C / (i - 1)
    assert lower <= exact <= upper, (i, lower, exact, upper)
    return lower, exact, upper
