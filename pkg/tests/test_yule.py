import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from yulebst.constants import psi, solve_constants
from yulebst.errors import ContractError, NumericalRangeError, ResourceLimitError
from yulebst.profile import advance_to, new_profile, observables
from yulebst.rng import RandomStream
from yulebst.yule import (
    EULER_GAMMA,
    _psi_trials,
    birth_times,
    expected_birth_time,
    kolmogorov_sf,
    ks_statistic,
    psi_mc_estimate,
    simulate_yule,
    terminal_birth_times,
    zeta_bias,
    zeta_samples,
)


def test_birth_times_n1():
    bt = birth_times(RandomStream(1), 1)
    assert bt.times.tolist() == [0.0]


def test_birth_times_increasing(rng):
    bt = birth_times(rng, 1000)
    assert bt.times[0] == 0 and (np.diff(bt.times) > 0).all()


def test_mean_t10():
    t = terminal_birth_times(RandomStream(2), 10, 10**6, "direct")
    target = sum(1 / j for j in range(1, 10))
    assert target == pytest.approx(2.8290, abs=5e-5)
    assert abs(t.mean() - target) <= 3 * t.std(ddof=1) / math.sqrt(len(t))


def test_birth_time_variance_bounded():
    for n in (10, 1000):
        t = terminal_birth_times(RandomStream(3, n), n, 20000, "direct")
        target = sum(1 / j**2 for j in range(1, n))
        assert target < math.pi**2 / 6
        assert t.var(ddof=1) == pytest.approx(target, rel=0.05)


def test_scaled_increments_are_unit_exponential():
    inc = birth_times(RandomStream(4), 10**5 + 1).scaled_increments()
    assert len(inc) == 10**5
    _, p = ks_statistic(inc, "exp1")
    assert p > 0.001


def test_martingale_centred(rng):
    ends = [birth_times(RandomStream(5, i), 200).martingale()[-1] for i in range(3000)]
    assert abs(np.mean(ends)) < 3 * np.std(ends) / math.sqrt(len(ends))


def test_split_and_direct_agree_in_law():
    a = terminal_birth_times(RandomStream(6, 0), 50000, 3000, "direct")
    b = terminal_birth_times(RandomStream(6, 1), 50000, 3000, "split")
    assert stats.ks_2samp(a, b).pvalue > 0.001


def test_zeta_mean_tracks_harmonic_offset():
    z = zeta_samples(RandomStream(7), 10**6, 10**4)
    target = expected_birth_time(10**6) - math.log(10**6)
    assert abs(zeta_bias(10**6)) < 1e-6
    assert abs(z.mean() - target) <= 3 * z.std(ddof=1) / 100


def test_zeta_is_gumbel():
    # T_n - log n -> -log W with W ~ Exp(1): a standard Gumbel law
    z = zeta_samples(RandomStream(8), 10**6, 10**4)
    _, p = ks_statistic(z, "gumbel")
    assert p > 0.01
    assert np.mean(z < 0) == pytest.approx(math.exp(-1), abs=0.02)
    assert z.mean() == pytest.approx(EULER_GAMMA, abs=0.05)


def test_zeta_precondition():
    with pytest.raises(ContractError):
        zeta_samples(RandomStream(1), 99, 10)


# Kolmogorov-Smirnov

def test_ks_quantile_sample():
    x = (np.arange(1, 9) - 0.5) / 8
    d, _ = ks_statistic(x, "uniform")
    assert d == pytest.approx(1 / 16)


def test_ks_constant_sample():
    c = 2.0
    d, p = ks_statistic(np.full(100, c), "exp1")
    assert d >= 1 - math.exp(-c) - 1e-12
    assert p < 1e-6


def test_ks_too_few_samples():
    with pytest.raises(ContractError):
        ks_statistic([], "exp1")
    with pytest.raises(ContractError):
        ks_statistic(np.ones(7), "exp1")


@given(st.integers(0, 2**32), st.integers(8, 400))
@settings(max_examples=40, deadline=None)
def test_ks_matches_scipy(seed, m):
    x = np.random.default_rng(seed).exponential(size=m) * 1.1
    d, p = ks_statistic(x, "exp1")
    assert d == pytest.approx(stats.kstest(x, "expon").statistic, abs=1e-12)
    assert p == pytest.approx(stats.kstwobign.sf(math.sqrt(m) * d), abs=1e-9)


def test_kolmogorov_series_edges():
    assert kolmogorov_sf(0.0) == 1.0
    assert kolmogorov_sf(5.0) < 1e-20


def test_ks_calibration():
    gen = np.random.default_rng(12)
    passes = sum(ks_statistic(gen.random(10**4), "uniform")[1] > 0.01 for _ in range(500))
    assert passes >= 0.98 * 500


# particle simulation

def test_horizon_zero():
    ps = simulate_yule(RandomStream(1), 0.0)
    assert ps.positions.tolist() == [0] and ps.size == 1


def test_mean_population_at_one():
    sizes = np.array([simulate_yule(RandomStream(9, i), 1.0).size for i in range(20000)])
    assert abs(sizes.mean() - math.e) <= 3 * sizes.std(ddof=1) / math.sqrt(len(sizes))


def test_mean_population_at_two():
    state = RandomStream(10).state
    mean, m2 = _psi_trials(state, 0.0, 10**5, 2.0)
    se = math.sqrt(m2 / (10**5 - 1) / 10**5)
    assert abs(mean - math.e**2) <= 3 * se


def test_population_law_is_geometric():
    sizes = np.array([simulate_yule(RandomStream(11, i), 1.0).size for i in range(20000)])
    p = math.exp(-1)
    ks = np.arange(1, 8)
    obs = np.array([(sizes == k).sum() for k in ks] + [(sizes >= 8).sum()])
    exp = np.array([p * (1 - p) ** (k - 1) for k in ks] + [(1 - p) ** 7]) * len(sizes)
    assert stats.chisquare(obs, exp).pvalue > 0.001


@given(st.integers(0, 2**32), st.integers(1, 200))
@settings(max_examples=40, deadline=None)
def test_event_invariants(seed, events):
    prev = simulate_yule(RandomStream(seed), clock=RandomStream(seed, 1), max_events=0)
    for k in range(1, min(events, 40) + 1):
        cur = simulate_yule(RandomStream(seed), clock=RandomStream(seed, 1), max_events=k)
        assert cur.size == prev.size + 1
        assert prev.min_position - cur.min_position in (0, 1)
        assert (cur.positions <= 0).all()
        prev = cur


@pytest.mark.parametrize("seed", range(25))
def test_coupling_with_profile(seed):
    # same choice stream: -M(T_n) = H_n and -S(T_n) = h_n at every event
    for k in range(0, 60):
        ps = simulate_yule(RandomStream(seed, 3), clock=RandomStream(seed, 4), max_events=k)
        prof = new_profile()
        advance_to(prof, RandomStream(seed, 3), k + 1)
        H, h, F = observables(prof)
        assert -ps.min_position == H
        assert -ps.max_position == h
        assert ps.frontier_size() == F
        assert ps.depth_counts.tolist() == prof.level_counts()


def test_population_cap():
    with pytest.raises(ResourceLimitError):
        simulate_yule(RandomStream(1), 30.0, population_cap=1000)


def test_negative_horizon():
    with pytest.raises(ContractError):
        simulate_yule(RandomStream(1), -1.0)


def test_weighted_sum():
    ps = simulate_yule(RandomStream(2), 2.0)
    d = -ps.positions
    assert ps.weighted_sum(0.3) == pytest.approx(np.exp(0.3 * d).sum())


@pytest.mark.parametrize("theta", [0.0, 0.5])
def test_psi_estimate(theta):
    mean, se = psi_mc_estimate(theta, 10**5, RandomStream(13, int(theta * 10)))
    assert abs(mean - psi(theta)) <= 3 * se


def test_psi_estimate_consistency():
    hits = 0
    reps = 200
    for i in range(reps):
        mean, se = psi_mc_estimate(0.3, 10**5, RandomStream(14, i))
        hits += abs(mean - psi(0.3)) <= 3 * se
    assert hits >= 0.99 * reps


def test_psi_range_guard():
    with pytest.raises(NumericalRangeError):
        psi_mc_estimate(2.0, 1000, RandomStream(1))
