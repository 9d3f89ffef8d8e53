import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from restartkit import SampleStream
from restartkit.errors import ConfigError
from restartkit.strategy import (
    BinSearch,
    CustomTable,
    ExponentialSchedule,
    FixedSchedule,
    Harmonic,
    LubyCounter,
    PolyLog,
    Zeta2Search,
    bit_length,
    luby_prefix_multiset,
    make_schedule,
    make_speeds,
    schedule_from_dict,
    validate_speed_schedule,
)

from conftest import chi2_pvalue


def luby_recursive(i):
    """Classic 1-based definition: 2^(k-1) if i = 2^k - 1, else t(i - 2^(k-1) + 1)."""
    k = i.bit_length()
    if i == 2**k - 1:
        return 2 ** (k - 1)
    return luby_recursive(i - 2 ** (k - 1) + 1)


def test_luby_first_fifteen():
    assert LubyCounter().take(15) == [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]


def test_luby_matches_recursive_definition_and_prefix():
    n = 5000
    ref = [luby_recursive(i) for i in range(1, n + 1)]
    assert LubyCounter().take(n) == ref
    np.testing.assert_array_equal(LubyCounter().prefix(n), ref)
    np.testing.assert_array_equal(LubyCounter(0.5).prefix(50), 0.5 * np.array(ref[:50]))


def test_luby_self_similar_blocks():
    # S_{i+1} = S_i, S_i, 2^(i+1)
    s = [1]
    for i in range(10):
        s = s + s + [2 ** (i + 1)]
        assert LubyCounter().take(len(s)) == s


@pytest.mark.parametrize("k", range(0, 17))
def test_luby_prefix_multiset(k):
    assert luby_prefix_multiset(k) == Counter({2**j: 2 ** (k - j) for j in range(k + 1)})


def test_fixed_and_exponential():
    assert FixedSchedule(3).take(2) == [3, 3]
    assert ExponentialSchedule(1, 1).take(4) == [1, 2, 4, 8]
    assert ExponentialSchedule(2, 0.5).take(3) == pytest.approx([2, 3, 4.5])
    with pytest.raises(ValueError):
        FixedSchedule(0)


def test_clone_restarts_the_sequence():
    s = LubyCounter()
    s.take(5)
    assert s.emitted == 5
    assert s.clone().take(3) == [1, 1, 2]


def test_factory_and_config_round_trip():
    for kind, params in [("fixed", {"delta": 2.0}), ("exponential", {"s": 1.0, "delta": 0.25}),
                         ("luby", {"unit": 0.5}), ("zeta2", {"unit": 1.0}), ("bin", {"unit": 2.0})]:
        s = make_schedule(kind, **params)
        assert schedule_from_dict(s.to_dict()).to_dict() == s.to_dict()
    with pytest.raises(ConfigError):
        make_schedule("fixed", bogus=1)
    with pytest.raises(ConfigError):
        make_schedule("nope")


def enumerate_bin_paths(max_len):
    """Exact law of R truncated at length max_len: every coin sequence, weighted exactly."""
    probs = {}
    for k in range(1, max_len + 1):
        # k-1 'continue' flips then a 'stop' flip, each with probability 1/2, plus k-1 fair bits
        for bits in itertools.product((0, 1), repeat=k - 1):
            value = int("1" + "".join(map(str, bits)), 2)
            probs[value] = Fraction(1, 2 ** k) * Fraction(1, 2 ** (k - 1))
    return probs


def test_bin_law_against_path_enumeration():
    probs = enumerate_bin_paths(10)
    b = BinSearch()
    rs = np.array(sorted(probs))
    np.testing.assert_allclose(b.pmf(rs), [float(probs[r]) for r in rs], rtol=0, atol=1e-15)
    for r in (1, 2, 3, 5, 100, 511):
        exact = 1 - sum(p for v, p in probs.items() if v < r)
        assert b.tail(r) == pytest.approx(float(exact), abs=1e-15)


def test_bin_sampler_law():
    b = BinSearch()
    rng = SampleStream(2)
    draws = [b.sample_int(rng) for _ in range(40000)]
    lens = Counter(bit_length(r) for r in draws)
    ks = range(1, 12)
    obs = [lens[k] for k in ks] + [sum(v for k, v in lens.items() if k >= 12)]
    probs = [2.0**-k for k in ks] + [2.0**-11]
    assert chi2_pvalue(obs, probs) > 1e-3
    # uniform within a length
    within = Counter(r for r in draws if bit_length(r) == 3)
    assert chi2_pvalue([within[r] for r in range(4, 8)], [0.25] * 4) > 1e-3


def test_bin_max_bits_cap():
    b = BinSearch(max_bits=3)
    rng = SampleStream(0)
    draws = [b.sample_int(rng) for _ in range(5000)]
    assert max(draws) <= 7 and b.capped > 0
    assert b.tail(8) == 0.0
    assert b.pmf(np.arange(1, 8)).sum() == pytest.approx(1.0)


@pytest.mark.parametrize("sched", [Zeta2Search(), BinSearch()])
@pytest.mark.parametrize("r0", [1, 2, 3, 7, 64, 65, 1000])
def test_conditional_tail_sampler(sched, r0):
    gen = np.random.default_rng(r0)
    xs = sched.sample_at_least(gen, r0, 30000)
    assert xs.min() >= r0
    # compare the frequency of the first few values with pmf / tail
    vals = np.arange(r0, r0 + 6)
    p = sched.pmf(vals) / sched.tail(r0)
    obs = [(xs == v).sum() for v in vals] + [(xs >= r0 + 6).sum()]
    assert chi2_pvalue(obs, np.append(p, 1 - p.sum())) > 1e-3


def test_zeta2_search_uses_zeta_law():
    z = Zeta2Search(unit=0.5)
    rng = SampleStream(0)
    ttls = z.take(5, rng)
    assert all(t / 0.5 == int(t / 0.5) for t in ttls)
    with pytest.raises(ValueError):
        Zeta2Search().next_ttl(None)


def test_random_schedules_are_seeded():
    a = BinSearch().take(50, SampleStream(7))
    assert BinSearch().take(50, SampleStream(7)) == a
    assert BinSearch().take(50, SampleStream(8)) != a


@pytest.mark.parametrize("t", [1, 2, 3, 4, 7, 8, 2**40, 2**50 - 1, 2**50, 2**60 + 3])
def test_bit_length(t):
    assert bit_length(t) == t.bit_length()


# speed schedules


def harmonic_work_brute(t):
    return sum(t // i for i in range(1, t + 1))


@pytest.mark.parametrize("t", [0, 1, 2, 3, 10, 97, 1000, 4096])
def test_harmonic_work_function(t):
    assert Harmonic().work_at(t) == harmonic_work_brute(t)


def test_harmonic_w3():
    assert Harmonic().work_at(3) == 5


def test_polylog_speeds_and_decay_constant():
    p = PolyLog()
    assert p.speed(1) == 1.0 and p.speed(2) == 0.5
    assert p.speed(3) == pytest.approx(1 / (3 * math.log(3) ** 2))
    ratios = p.speeds(20000)[1::2][:10000] / p.speeds(10000)
    assert ratios.min() == pytest.approx(0.5 * (math.log(3) / math.log(6)) ** 2, rel=1e-12)
    assert int(np.argmin(ratios)) + 1 == 3
    assert validate_speed_schedule(p, 0.18, 10**4)
    assert not validate_speed_schedule(p, 0.4, 10**4)


def test_validate_rejects_bad_tables():
    assert not validate_speed_schedule(CustomTable([1.0, 0.1], c=0.5), 0.5, 100)
    assert not validate_speed_schedule(CustomTable([0.5, 1.0], c=0.5), 0.5, 100)
    assert validate_speed_schedule(Harmonic(), 0.5, 10**4)


def test_make_speeds():
    assert isinstance(make_speeds("harmonic"), Harmonic)
    assert isinstance(make_speeds("polylog"), PolyLog)
    with pytest.raises(ConfigError):
        make_speeds("harmonic", c=1)
    with pytest.raises(ConfigError):
        make_speeds("nope")


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 500), st.integers(1, 2000))
def test_finish_time_is_first_tick_reaching_n(n, i):
    for sp in (Harmonic(), PolyLog()):
        t = sp.finish_time(n, i)
        assert sp.progress(t, i) >= n
        assert t == 1 or sp.progress(t - 1, i) < n


@settings(max_examples=80, deadline=None)
@given(st.integers(1, 3000))
def test_count_and_work_agree_with_brute_force(t):
    p = PolyLog()
    a = p.speeds(4 * t + 10)
    brute_count = int((np.floor(t * a) >= 1).sum())
    assert p.count_at(t) == brute_count
    assert p.work_at(t) == int(np.floor(t * a).sum())
