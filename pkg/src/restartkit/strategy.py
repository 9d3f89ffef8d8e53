"""TTL schedules for the stop/restart model and speed schedules for wide search.

A TTL schedule is a small stateful generator: ``next_ttl(rng)`` returns the
next threshold. Deterministic kinds ignore ``rng``. Each schedule also knows how
to ``clone`` itself into a fresh instance, which is what simulation trials use.
"""
from __future__ import annotations

import math
from collections import Counter, deque
from functools import lru_cache
from typing import Any

import numpy as np

from . import dist as _dist
from .errors import ConfigError, ScheduleInvalid
from .rng import SampleStream


class TtlSchedule:
    kind: str = ""
    deterministic: bool = True

    def __init__(self):
        self.emitted = 0

    def next_ttl(self, rng: SampleStream | None = None) -> float:
        ttl = self._next(rng)
        self.emitted += 1
        return ttl

    def _next(self, rng):
        raise NotImplementedError

    def take(self, n: int, rng: SampleStream | None = None) -> list[float]:
        return [self.next_ttl(rng) for _ in range(n)]

    def clone(self) -> "TtlSchedule":
        """Fresh instance with the same parameters and no emitted TTLs."""
        return type(self)(**self.config())

    def config(self) -> dict[str, Any]:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, **self.config()}

    def prefix(self, n: int) -> np.ndarray:
        """First ``n`` TTLs of a fresh instance (deterministic kinds only)."""
        if not self.deterministic:
            raise TypeError(f"{self.kind} schedule is randomized")
        return np.array(self.clone().take(n), dtype=float)

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.config().items())
        return f"{type(self).__name__}({args})"


class FixedSchedule(TtlSchedule):
    kind = "fixed"

    def __init__(self, delta: float = 1.0):
        super().__init__()
        if not delta > 0:
            raise ValueError("delta must be positive")
        self.delta = float(delta)

    def _next(self, rng):
        return self.delta

    def config(self):
        return {"delta": self.delta}

    def prefix(self, n):
        return np.full(n, self.delta)


class ExponentialSchedule(TtlSchedule):
    """r_i = (1 + delta)^(i-1) * s."""

    kind = "exponential"

    def __init__(self, s: float = 1.0, delta: float = 1.0):
        super().__init__()
        if not s > 0 or delta < 0:
            raise ValueError("need s > 0 and delta >= 0")
        self.s = float(s)
        self.delta = float(delta)

    def _next(self, rng):
        return self.s * (1.0 + self.delta) ** self.emitted

    def config(self):
        return {"s": self.s, "delta": self.delta}

    def prefix(self, n):
        with np.errstate(over="ignore"):
            return self.s * (1.0 + self.delta) ** np.arange(n, dtype=float)


class LubyCounter(TtlSchedule):
    """Counter search: at each increment of c emit unit * 2^j for every 2^j dividing c."""

    kind = "luby"

    def __init__(self, unit: float = 1.0):
        super().__init__()
        if not unit > 0:
            raise ValueError("unit must be positive")
        self.unit = float(unit)
        self.counter = 0
        self._pending: deque[float] = deque()

    def _next(self, rng):
        if not self._pending:
            self.counter += 1
            tz = (self.counter & -self.counter).bit_length() - 1
            self._pending.extend(self.unit * 2.0**j for j in range(tz + 1))
        return self._pending.popleft()

    def config(self):
        return {"unit": self.unit}

    def prefix(self, n):
        return np.ldexp(self.unit, luby_exponents(n))


def luby_exponents(n: int) -> np.ndarray:
    """Exponents j of the first n counter-search TTLs (TTL = 2^j)."""
    if n <= 0:
        return np.zeros(0, dtype=np.int64)
    # counter c emits tz(c) + 1 values, about 2 per increment on average
    c = np.arange(1, n + 2, dtype=np.int64)
    while True:
        low = c & -c
        lens = np.frexp(low.astype(float))[1]          # tz(c) + 1
        if lens.sum() >= n:
            break
        c = np.arange(1, 2 * len(c) + 1, dtype=np.int64)
    starts = np.cumsum(lens) - lens
    total = int(lens.sum())
    out = np.arange(total, dtype=np.int64) - np.repeat(starts, lens)
    return out[:n]


def luby_prefix_multiset(k: int) -> Counter:
    """Multiset of TTLs emitted while the counter runs from 1 to 2^k (unit 1)."""
    if not 0 <= k <= 20:
        raise ValueError("k must lie in 0..20")
    sched = LubyCounter()
    out: Counter = Counter()
    while True:
        if sched.counter == 2**k and not sched._pending:
            return out
        out[sched.next_ttl()] += 1


class IidIntegerSchedule(TtlSchedule):
    """TTL = unit * R with R drawn afresh from an integer law on every call."""

    deterministic = False

    def __init__(self, unit: float = 1.0):
        super().__init__()
        if not unit > 0:
            raise ValueError("unit must be positive")
        self.unit = float(unit)

    def _next(self, rng):
        if rng is None:
            raise ValueError(f"{self.kind} schedule needs a random stream")
        return self.unit * float(self.sample_int(rng))

    def config(self):
        return {"unit": self.unit}

    # integer law of R; used by the fast restart sampler
    def sample_int(self, rng: SampleStream) -> int:
        raise NotImplementedError

    def pmf(self, r: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tail(self, r: int) -> float:
        """P[R >= r]."""
        raise NotImplementedError

    def sample_at_least(self, gen: np.random.Generator, r0: int, size: int) -> np.ndarray:
        """``size`` draws of R conditioned on R >= r0."""
        raise NotImplementedError


class Zeta2Search(IidIntegerSchedule):
    kind = "zeta2"

    def sample_int(self, rng):
        return _dist._zeta2_invert(rng.open_unit())

    def pmf(self, r):
        r = np.asarray(r, dtype=float)
        return _dist.ZETA2_C / (r * r)

    def tail(self, r):
        return _dist.zeta2_tail(r)

    def sample_at_least(self, gen, r0, size):
        return _dist.zeta2_sample_array(gen, size, r0)


class BinSearch(IidIntegerSchedule):
    """Random counter search: R ~ BIN, a random bit string with leading 1.

    Draws hitting the ``max_bits`` cap are counted in ``capped``.
    """

    kind = "bin"

    def __init__(self, unit: float = 1.0, max_bits: int = 63):
        super().__init__(unit)
        if not 1 <= max_bits <= 63:
            raise ValueError("max_bits must lie in 1..63")
        self.max_bits = int(max_bits)
        self.capped = 0

    def config(self):
        return {"unit": self.unit, "max_bits": self.max_bits}

    def sample_int(self, rng):
        value, bits = 1, 1
        while rng.random() >= 0.5:          # finalize with probability 1/2
            if bits == self.max_bits:
                self.capped += 1
                break
            value = 2 * value + rng.integers(0, 2)
            bits += 1
        return value

    def _len_prob(self, k):
        """P[l(R) = k]."""
        if k < self.max_bits:
            return 2.0**-k
        return 2.0 ** -(self.max_bits - 1) if k == self.max_bits else 0.0

    def pmf(self, r):
        r = np.asarray(r, dtype=np.int64)
        k = np.frexp(r.astype(float))[1]
        p = np.where(k < self.max_bits, np.ldexp(1.0, 1 - 2 * k), 0.0)
        p = np.where(k == self.max_bits, np.ldexp(1.0, 2 - 2 * self.max_bits), p)
        return np.where(r >= 1, p, 0.0)

    def tail(self, r):
        if r <= 1:
            return 1.0
        k = int(r).bit_length()
        if k > self.max_bits:
            return 0.0
        longer = 2.0**-k if k < self.max_bits else 0.0
        return longer + self._len_prob(k) * (2**k - r) / 2 ** (k - 1)

    def sample_at_least(self, gen, r0, size):
        k0 = max(int(r0), 1).bit_length()
        r0 = max(int(r0), 1)
        same = self._len_prob(k0) * (2**k0 - r0) / 2 ** (k0 - 1)
        longer = 2.0**-k0 if k0 < self.max_bits else 0.0
        stay = gen.random(size) * (same + longer) < same
        lens = np.full(size, k0, dtype=np.int64)
        n_long = int((~stay).sum())
        if n_long:
            lens[~stay] = np.minimum(k0 + gen.geometric(0.5, n_long), self.max_bits)
        lo = np.where(stay, r0, np.left_shift(np.int64(1), lens - 1))
        hi = np.left_shift(np.int64(1), np.minimum(lens, 62)).astype(float)
        # widths up to 2^62 are handled in floating point; ties at that size are immaterial
        width = np.where(lens >= 63, 2.0**62, hi - lo)
        return (lo + np.floor(gen.random(size) * width)).astype(float)


def bit_length(t: int) -> int:
    """l(t) = 1 + floor(log2 t) for a positive integer t."""
    return int(t).bit_length()


_SCHEDULES = {
    "fixed": FixedSchedule,
    "exponential": ExponentialSchedule,
    "luby": LubyCounter,
    "zeta2": Zeta2Search,
    "bin": BinSearch,
}


def make_schedule(kind: str, **params) -> TtlSchedule:
    if kind not in _SCHEDULES:
        raise ConfigError(f"unknown strategy kind {kind!r}")
    try:
        return _SCHEDULES[kind](**params)
    except TypeError as exc:
        raise ConfigError(f"invalid parameters for {kind}: {exc}") from exc
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def schedule_from_dict(spec: dict[str, Any]) -> TtlSchedule:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("strategy spec must be an object with a 'kind' key")
    return make_schedule(spec["kind"], **{k: v for k, v in spec.items() if k != "kind"})


# --------------------------------------------------------------------------
# speed schedules


class SpeedSchedule:
    """Map i -> alpha_i, the speed of copy i in wide search.

    Global time is the integer clock of copy 1; copy i has run
    ``floor(t * alpha_i)`` seconds by time t.
    """

    kind: str = ""
    declared_c: float = 0.5

    def __init__(self):
        self._alpha = np.zeros(0)
        self._validated = 1

    def speed(self, i: int) -> float:
        if i < 1:
            raise ValueError("copy index starts at 1")
        return float(self.speeds(i)[i - 1])

    def _compute(self, idx: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def speeds(self, n: int) -> np.ndarray:
        """alpha_1..alpha_n."""
        if len(self._alpha) < n:
            size = max(n, 2 * len(self._alpha), 1024)
            self._alpha = self._compute(np.arange(1, size + 1, dtype=float))
        return self._alpha[:n]

    def progress(self, t: int, i: int) -> int:
        return math.floor(t * self.speed(i))

    def finish_time(self, n: int, i: int) -> int:
        """Smallest integer time t with floor(t * alpha_i) >= n."""
        a = self.speed(i)
        t = max(1, math.ceil(n / a))
        while math.floor(t * a) < n:
            t += 1
        while t > 1 and math.floor((t - 1) * a) >= n:
            t -= 1
        return t

    def count_at(self, t: int) -> int:
        """Number of copies instantiated by time t."""
        if t < 1:
            return 0
        n = 1024
        while self.speeds(n)[-1] * t >= 1.0:
            n *= 2
            if n > 2**27:
                raise ScheduleInvalid("speeds do not decay; infinitely many copies start at once")
        a = self.speeds(n)
        k = int(np.searchsorted(-a, -1.0 / t, side="right"))
        while k < n and math.floor(t * a[k]) >= 1:
            k += 1
        while k > 0 and math.floor(t * a[k - 1]) < 1:
            k -= 1
        return k

    def work_at(self, t: int) -> int:
        """W(t): total seconds delivered to all copies by time t."""
        k = self.count_at(t)
        return int(np.floor(t * self.speeds(k)).sum())

    def progress_array(self, t: int, n: int) -> np.ndarray:
        return np.floor(t * self.speeds(n)).astype(np.int64)

    def ensure_valid(self, horizon: int) -> None:
        if horizon <= self._validated:
            return
        h = max(horizon, 2 * self._validated)
        if not validate_speed_schedule(self, self.declared_c, h):
            raise ScheduleInvalid(f"{self!r} violates the decay assumption within {h} copies")
        self._validated = h

    def __repr__(self):
        return f"{type(self).__name__}()"


class Harmonic(SpeedSchedule):
    """alpha_i = 1/i; all clock arithmetic is exact integer arithmetic."""

    kind = "harmonic"
    declared_c = 0.5

    def _compute(self, idx):
        return 1.0 / idx

    def speed(self, i):
        if i < 1:
            raise ValueError("copy index starts at 1")
        return 1.0 / i

    def progress(self, t, i):
        return int(t) // i

    def finish_time(self, n, i):
        return n * i

    def count_at(self, t):
        return max(int(t), 0)

    def work_at(self, t):
        return _divisor_summatory(int(t))

    def progress_array(self, t, n):
        return int(t) // np.arange(1, n + 1, dtype=np.int64)

    def ensure_valid(self, horizon):
        pass


@lru_cache(maxsize=1 << 16)
def _divisor_summatory(n: int) -> int:
    """sum_{i=1}^{n} floor(n / i), by the hyperbola method."""
    if n <= 0:
        return 0
    s = math.isqrt(n)
    if s < 64:
        head = sum(n // i for i in range(1, s + 1))
    else:
        head = int((n // np.arange(1, s + 1, dtype=np.int64)).sum())
    return 2 * head - s * s


class PolyLog(SpeedSchedule):
    """alpha_1 = 1, alpha_2 = 1/2, alpha_i = 1/(i ln^2 i) for i > 2."""

    kind = "polylog"
    # min over i of alpha_{2i}/alpha_i is ~0.188, attained at i = 3
    declared_c = 0.18

    def _compute(self, idx):
        with np.errstate(divide="ignore"):
            out = 1.0 / (idx * np.log(idx) ** 2)
        out[idx == 1] = 1.0
        out[idx == 2] = 0.5
        return out

    def speed(self, i):
        if i < 1:
            raise ValueError("copy index starts at 1")
        if i <= 2:
            return 1.0 / i
        return float(self.speeds(i)[i - 1])


class CustomTable(SpeedSchedule):
    """Explicit speeds, continued past the table by repeating the last ratio."""

    kind = "custom"

    def __init__(self, values, c: float = 0.5):
        super().__init__()
        values = [float(v) for v in values]
        if not values or any(not (0 < v <= 1) for v in values):
            raise ValueError("speeds must lie in (0, 1]")
        self.values = values
        self.declared_c = float(c)

    def _compute(self, idx):
        v = np.array(self.values)
        n = len(v)
        ratio = v[-1] / v[-2] if n > 1 else 1.0
        i = idx.astype(np.int64)
        out = np.empty(len(i))
        inside = i <= n
        out[inside] = v[i[inside] - 1]
        out[~inside] = v[-1] * ratio ** (i[~inside] - n).astype(float)
        return out

    def __repr__(self):
        return f"CustomTable({self.values!r}, c={self.declared_c})"


def validate_speed_schedule(sched: SpeedSchedule, c: float, horizon: int) -> bool:
    """True iff alpha is nonincreasing on 1..horizon and alpha_{2i} >= c alpha_i."""
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    a = sched.speeds(horizon)
    if np.any(np.diff(a) > 0):
        return False
    half = horizon // 2
    return bool(np.all(a[1::2][:half] >= c * a[:half]))


_SPEEDS = {"harmonic": Harmonic, "polylog": PolyLog}


def make_speeds(kind: str, **params) -> SpeedSchedule:
    if kind == "custom":
        return CustomTable(**params)
    if kind not in _SPEEDS:
        raise ConfigError(f"unknown speed schedule {kind!r}")
    if params:
        raise ConfigError(f"unknown key(s) for {kind}: {', '.join(sorted(params))}")
    return _SPEEDS[kind]()
