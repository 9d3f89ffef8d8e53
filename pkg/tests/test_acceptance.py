"""End-to-end acceptance checks, one test per criterion.

Each test prints (and records for the terminal summary) a single
``criterion N: PASS|FAIL ...`` line before asserting. Run with

    pytest tests/test_acceptance.py -s
"""
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np
import psutil
import pytest

from conftest import ACCEPTANCE_LINES, HANG_SECONDS, chi2_pvalue, point_mass
from restartkit import (
    BinSearch,
    DiscreteFinite,
    ExponentialSchedule,
    FixedSchedule,
    GeometricSeconds,
    Harmonic,
    LubyCounter,
    PolyLog,
    SampleStream,
    StepOrForever,
    Zeta2,
    Zeta2Search,
)
from restartkit.analysis import alpha_median, dominates_hyperbola, front, optimal_threshold, profile_of
from restartkit.bench import BenchConfig, monte_carlo
from restartkit.engine import Caps, run_cached, run_restart, run_wide, run_wide_as_restart
from restartkit.strategy import luby_prefix_multiset
from restartkit.supervisor import CommandSpec, Limits, supervise

# Upper bounds on trimmed_mean / (O (1 + log2 O)) over the 10x10 grid,
# frozen at roughly 1.5x the largest value seen at seed 11 with 10^4 trials
# (observed maxima: luby 1.00, zeta2 1.27, bin 1.80, harmonic 0.80).
RATIO_CAP = {"luby": 1.5, "zeta2": 2.0, "bin": 2.7, "harmonic": 1.2}
BAND = 8.0
GRID_TRIALS = 10**4


def record(n, ok, detail, elapsed):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f}s) {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def grid_ratios(**kw):
    out = []
    for i in range(10):
        for j in range(10):
            cfg = BenchConfig(StepOrForever(2**i, 2.0**-j), trials=GRID_TRIALS, seed=11, **kw)
            r = monte_carlo(cfg)
            out.append((r.analytic_opt, r.ratio_opt_log))
    return np.array(out)


def band_stats(name, **kw):
    t0 = time.time()
    rows = grid_ratios(**kw)
    sel = rows[rows[:, 0] >= 4, 1]
    band = sel.max() / sel.min()
    top = rows[:, 1].max()
    ok = band <= BAND and top <= RATIO_CAP[name]
    return ok, (f"{name}: band {band:.3f} (<= {BAND}), max ratio {top:.3f} (<= {RATIO_CAP[name]}), "
                f"{time.time() - t0:.0f}s")


def test_criterion_01_fixed_on_step():
    t0 = time.time()
    r = monte_carlo(BenchConfig(StepOrForever(1, 0.01), FixedSchedule(1), trials=10**5, seed=1))
    k = np.bincount(r.attempts)[1:]
    probs = 0.01 * 0.99 ** np.arange(len(k))
    probs[-1] = 0.99 ** (len(k) - 1)
    pval = chi2_pvalue(k, probs)
    elapsed = time.time() - t0
    ok = abs(r.trimmed_mean / 100 - 1) <= 0.05 and pval > 0.001 and elapsed < 5
    record(1, ok, f"trimmed mean {r.trimmed_mean:.2f} (100 +- 5%), chi2 p {pval:.3f}", elapsed)
    assert ok


def test_criterion_02_fixed_on_zeta2():
    t0 = time.time()
    r = monte_carlo(BenchConfig(Zeta2(), FixedSchedule(1), trials=10**5, seed=2))
    target = math.pi**2 / 6
    delta = optimal_threshold(Zeta2()).delta
    ok = abs(r.trimmed_mean / target - 1) <= 0.02 and delta == 1
    record(2, ok, f"trimmed mean {r.trimmed_mean:.4f} (pi^2/6 = {target:.4f} +- 2%), delta {delta}",
           time.time() - t0)
    assert ok


def test_criterion_03_luby_band():
    t0 = time.time()
    ok, detail = band_stats("luby", schedule=LubyCounter())
    record(3, ok, detail, time.time() - t0)
    assert ok


def test_criterion_04_iid_band():
    t0 = time.time()
    results = [band_stats("zeta2", schedule=Zeta2Search()), band_stats("bin", schedule=BinSearch())]
    ok = all(r[0] for r in results)
    record(4, ok, "; ".join(r[1] for r in results), time.time() - t0)
    assert ok


def bin_enumeration(max_len=12):
    """Exact law of R from every coin-flip path of length <= max_len."""
    mass = {}
    for k in range(1, max_len + 1):
        # a length-k path: k - 1 free bits after the leading one, then stop
        p = Fraction(1, 2**k) / 2 ** (k - 1)
        for r in range(2 ** (k - 1), 2**k):
            mass[r] = p
    rest = Fraction(1, 2**max_len)  # strings longer than max_len, all >= 2^max_len
    return mass, rest


def test_criterion_05_bin_exact():
    t0 = time.time()
    mass, rest = bin_enumeration()
    sched = BinSearch()
    tail = rest
    ok = True
    for t in range(4095, 0, -1):
        tail += mass[t]
        ok &= Fraction(1, t) <= tail <= Fraction(2, t)
        ok &= abs(sched.tail(t) - float(tail)) <= 1e-12
    for k in range(1, 13):
        lk = sum(mass[r] for r in range(2 ** (k - 1), 2**k))
        ok &= lk == Fraction(1, 2**k)
        ok &= float(sched.pmf(np.arange(2 ** (k - 1), 2**k)).sum()) == pytest.approx(2.0**-k, abs=1e-15)
    elapsed = time.time() - t0
    ok = bool(ok) and elapsed < 1
    record(5, ok, "1/t <= P[R >= t] <= 2/t for t < 4096, length law 2^-k", elapsed)
    assert ok


def test_criterion_06_luby_structure():
    t0 = time.time()
    ok = all(luby_prefix_multiset(k) == Counter({2 ** (k - j): 2**j for j in range(k + 1)})
             for k in range(17))
    first = [int(v) for v in LubyCounter().prefix(15)]
    ok &= first == [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8]
    seq = LubyCounter().prefix(2**14 - 1)
    ok &= all(dominates_hyperbola(front(seq[: 2 ** (i + 1) - 1]), 2**i) for i in range(13))
    elapsed = time.time() - t0
    ok = bool(ok) and elapsed < 1
    record(6, ok, "multisets k <= 16, 15-term prefix, hyperbola domination i <= 12", elapsed)
    assert ok


def random_discrete(gen):
    n = int(gen.integers(1, 33))
    times = np.unique(gen.integers(1, 10**4, size=n)).astype(float)
    w = gen.random(len(times) + 1) + 1e-3
    if gen.random() < 0.5:
        w[-1] = 0.0
    w /= w.sum()
    atoms = tuple(zip(times.tolist(), w[:-1].tolist()))
    pf = max(0.0, 1.0 - math.fsum(w[:-1])) if w[-1] > 0 else 0.0
    if pf == 0.0:
        s = math.fsum(p for _, p in atoms)
        atoms = tuple((t, p / s) for t, p in atoms)
    return DiscreteFinite(atoms, pf)


def test_criterion_07_sandwich():
    t0 = time.time()
    gen = np.random.default_rng(7)
    worst = 0.0
    ok = True
    for _ in range(1000):
        d = random_discrete(gen)
        f = optimal_threshold(d).expected_cost
        r = profile_of(d).work
        ok &= f <= r * (1 + 1e-12) and r <= 8 * f
        worst = max(worst, r / f)
    elapsed = time.time() - t0
    ok = bool(ok) and elapsed < 10
    record(7, ok, f"f* <= R(t*) <= 8 f* on 1000 instances, worst R/f {worst:.3f}", elapsed)
    assert ok


def test_criterion_08_exponential_search():
    t0 = time.time()
    d = GeometricSeconds(1 / 16)
    m = alpha_median(d, 0.5)
    part_a = []
    for delta in (0.25, 0.5):
        r = monte_carlo(BenchConfig(d, ExponentialSchedule(1, delta), trials=10**4, seed=8))
        bound = 8 * m * (1 + 1 / delta)
        part_a.append((delta, r.trimmed_mean, bound, r.trimmed_mean <= bound))
    step = StepOrForever(1, 0.25)
    part_b = []
    for cap in (10**3, 10**4, 10**5):
        r = monte_carlo(BenchConfig(step, ExponentialSchedule(1, 1), trials=10**4, seed=8,
                                    caps=Caps(max_total_work=cap)))
        part_b.append((cap, r.mean, r.censored_count / r.config.trials))
    means = [mean for _, mean, _ in part_b]
    increasing = all(a < b for a, b in zip(means, means[1:]))
    heavy = all(frac > 0.10 for _, _, frac in part_b)
    ok_a = all(x[-1] for x in part_a)
    ok = ok_a and increasing and heavy
    a_txt = ", ".join(f"delta {dl}: {tm:.1f} <= {b:.0f}" for dl, tm, b, _ in part_a)
    b_txt = ", ".join(f"cap {c:g}: mean {mu:.0f} censored {fr:.1%}" for c, mu, fr in part_b)
    record(8, ok, f"(A) {'ok' if ok_a else 'violated'} [{a_txt}]; (B) increasing={increasing} "
                  f"censored>10%={heavy} [{b_txt}]", time.time() - t0)
    assert ok


def test_criterion_09_harmonic_band():
    t0 = time.time()
    rows = grid_ratios(speeds=Harmonic(), model="wide")
    top = rows[:, 1].max()
    ok = top <= RATIO_CAP["harmonic"]
    record(9, ok, f"max ratio {top:.3f} (<= {RATIO_CAP['harmonic']})", time.time() - t0)
    assert ok


def test_criterion_10_polylog_linear():
    t0 = time.time()
    scaled = []
    for p in (1 / 2, 1 / 10, 1 / 100):
        r = monte_carlo(BenchConfig(GeometricSeconds(p), speeds=PolyLog(), model="wide",
                                    trials=10**4, seed=10))
        scaled.append(r.trimmed_mean * p)
    spread = max(scaled) / min(scaled)
    ok = spread < 3
    record(10, ok, f"trimmed_mean/mu = {', '.join(f'{v:.3f}' for v in scaled)}, spread {spread:.3f} (< 3)",
           time.time() - t0)
    assert ok


def test_criterion_11_conversion_overhead():
    t0 = time.time()
    sp = Harmonic()
    worst = 0.0
    dists = [point_mass(float(x)) for x in range(1, 65)]
    dists += [StepOrForever(a, b) for a in (1, 3, 8, 20) for b in (0.5, 0.2, 0.05)]
    for d in dists:
        for seed in range(20):
            w = run_wide(d, sp, SampleStream(seed, 0)).total_work
            c = run_wide_as_restart(d, sp, SampleStream(seed, 0)).total_work
            worst = max(worst, c / w)
    ok = worst <= 4
    record(11, ok, f"worst wide_as_restart / wide = {worst:.3f} (<= 4) over {len(dists) * 20} pairs",
           time.time() - t0)
    assert ok


def test_criterion_12_cache():
    t0 = time.time()
    same = True
    for d in (StepOrForever(4, 0.25), Zeta2()):
        for seed in range(1000):
            a = run_cached(d, LubyCounter(), 0, SampleStream(seed, 0))
            b = run_restart(d, LubyCounter(), SampleStream(seed, 0))
            same &= a == b
    step = StepOrForever(4, 0.25)
    cached = monte_carlo(BenchConfig(step, LubyCounter(), model="cached", capacity=8, trials=10**4, seed=12))
    plain = monte_carlo(BenchConfig(step, LubyCounter(), trials=10**4, seed=12))
    sem = math.hypot(cached.sem, plain.sem)
    margin = plain.trimmed_mean + 3 * sem
    ok = bool(same) and cached.trimmed_mean <= margin
    record(12, ok, f"capacity 0 identical={bool(same)}; cached(8) {cached.trimmed_mean:.2f} "
                   f"<= restart {plain.trimmed_mean:.2f} + 3 SEM ({margin:.2f})", time.time() - t0)
    assert ok


def leftovers(script):
    found = []
    for p in psutil.process_iter(["cmdline"]):
        cmd = " ".join(p.info["cmdline"] or [])
        if str(script) in cmd or HANG_SECONDS in cmd:
            found.append(p.pid)
    return found


def test_criterion_13_supervisor(flaky_script):
    t0 = time.time()
    cmd = CommandSpec(str(flaky_script))

    def one(rep):
        return supervise(cmd, LubyCounter(), unit=0.1, limits=Limits(max_wall=60),
                         rng=SampleStream(13, rep))

    with ThreadPoolExecutor(max_workers=4) as pool:
        reports = list(pool.map(one, range(200)))
    time.sleep(0.2)
    orphans = leftovers(flaky_script) + [c.pid for c in psutil.Process().children(recursive=True)]
    rate = sum(r.success for r in reports) / len(reports)
    med = float(np.median([r.attempts for r in reports]))
    ok = rate == 1.0 and 2 <= med <= 8 and not orphans
    record(13, ok, f"success rate {rate:.0%}, median attempts {med:g} (in [2, 8]), orphans {len(orphans)}",
           time.time() - t0)
    assert ok
