import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from levelone.birth_death import (
    QueueRates,
    RateSchedule,
    a_inverse,
    a_of_t,
    extinction_density,
    extinction_probability,
    sample_extinction_times,
    simulate_extinction,
    survival_grid,
    survival_homogeneous,
    survival_inhomogeneous,
    survival_tail_asymptotic,
)
from levelone.verification import thinning_extinction_times

P = 10.0
HALVES = RateSchedule([0.0, 0.5 * P], [1.5, 0.5], P)


def test_rates_validation():
    with pytest.raises(ValueError):
        QueueRates(0.0, 1.0)
    with pytest.raises(ValueError):
        QueueRates(1.0, -1.0)
    r = QueueRates(1.0, 4.0)
    assert r.C == pytest.approx(1.0)
    assert QueueRates(1.0, 1.0).is_critical
    assert QueueRates(2.0, 1.0).supercritical


def test_schedule_validation():
    with pytest.raises(ValueError):
        RateSchedule([0.5], [1.0], 1.0)
    with pytest.raises(ValueError):
        RateSchedule([0.0, 0.5], [1.0, -1.0], 1.0)
    with pytest.raises(ValueError):
        RateSchedule([0.0, 1.0], [1.0, 1.0], 1.0)


def test_clock_identity_and_steps():
    ident = RateSchedule.identity()
    assert a_of_t(ident, 7.0) == pytest.approx(7.0)
    assert a_of_t(HALVES, P) == pytest.approx(P)
    # 2 full periods plus a half period at alpha = 1.5
    assert a_of_t(HALVES, 2.5 * P) == pytest.approx(2.75 * P)
    assert a_inverse(ident, 3.0) == pytest.approx(3.0)
    assert a_inverse(HALVES, 0.75 * P) == pytest.approx(0.5 * P)
    assert HALVES.v == pytest.approx(1.0)


def test_clock_round_trip():
    rng = np.random.default_rng(5)
    sched = RateSchedule.steps([1.6, 0.4, 1.2, 0.8], 4.0)
    t = rng.uniform(0, 50, 100)
    np.testing.assert_allclose(a_inverse(sched, a_of_t(sched, t)), t, rtol=1e-12, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.05, 5.0), min_size=1, max_size=6), st.floats(0.0, 100.0))
def test_clock_round_trip_property(values, t):
    sched = RateSchedule.steps(values, 3.0)
    assert float(a_inverse(sched, a_of_t(sched, t))) == pytest.approx(t, rel=1e-10, abs=1e-10)


def test_clock_is_flat_where_alpha_vanishes():
    sched = RateSchedule([0.0, 1.0], [1.0, 0.0], 2.0)
    assert a_of_t(sched, 1.5) == pytest.approx(1.0)
    # generalized inverse picks the first time the level is reached
    assert a_inverse(sched, 1.0) == pytest.approx(1.0)


def test_survival_trivial_cases():
    r = QueueRates(1.0, 1.0)
    assert survival_homogeneous(r, 0, 3.0) == 0.0
    assert survival_homogeneous(r, 1, 0.0) == 1.0
    assert survival_grid(r, [0, 2], [0.0, 1.0])[0, 1] == 1.0


def test_survival_frozen_oracle(oracles):
    assert survival_homogeneous(QueueRates(1, 2), 3, 1.0) == pytest.approx(
        oracles["survival lam=1 mu=2 x=3 t=1"], abs=1e-10)
    assert survival_homogeneous(QueueRates(1, 1), 1, 5.0) == pytest.approx(
        oracles["survival lam=1 mu=1 x=1 t=5"], abs=1e-10)


def test_survival_monte_carlo():
    rng = np.random.default_rng(11)
    n = 1_000_000
    draws = sample_extinction_times(QueueRates(1, 2), RateSchedule.identity(), 3, n, rng, cap=2.0)
    emp = float(np.mean(draws > 1.0))
    exact = survival_homogeneous(QueueRates(1, 2), 3, 1.0)
    assert abs(emp - exact) <= 3 * math.sqrt(exact * (1 - exact) / n)


def test_grid_engine_matches_adaptive():
    ts = np.array([0.01, 0.3, 2.0, 15.0, 400.0])
    for r in (QueueRates(1, 1), QueueRates(0.5, 2.0), QueueRates(2.0, 1.0)):
        grid = survival_grid(r, [1, 4, 9], ts)
        for j, x in enumerate((1, 4, 9)):
            for i, t in enumerate(ts):
                assert grid[i, j] == pytest.approx(survival_homogeneous(r, x, t), abs=1e-9)


def test_extinction_probability():
    assert extinction_probability(QueueRates(1, 2), 5) == pytest.approx(1.0, abs=1e-9)
    assert extinction_probability(QueueRates(2, 1), 3) == pytest.approx(0.125, abs=1e-9)
    assert extinction_probability(QueueRates(2, 1), 0) == 1.0


def test_density_nonnegative_and_normalized():
    s = np.linspace(0, 30, 3001)
    g = extinction_density(QueueRates(1, 3), 2, s)
    assert np.all(g >= 0)
    assert g[0] == 0.0


def test_tail_asymptotic_critical():
    assert survival_tail_asymptotic(QueueRates(1, 1), 2, 100.0) == pytest.approx(2 / math.sqrt(100 * math.pi))


def test_tail_asymptotic_ratio_tends_to_one():
    r = QueueRates(1, 1)
    ratios = [survival_homogeneous(r, 1, T) / survival_tail_asymptotic(r, 1, T) for T in (1e3, 1e4, 1e5)]
    gaps = [abs(q - 1) for q in ratios]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 1e-4


def test_tail_asymptotic_subcritical():
    r = QueueRates(0.5, 2.0)
    approx = survival_tail_asymptotic(r, 1, 50.0)
    exact = survival_homogeneous(r, 1, 50.0)
    assert 0.5 <= exact / approx <= 2.0
    with pytest.raises(ValueError):
        survival_tail_asymptotic(QueueRates(2, 1), 1, 10.0)


def test_inhomogeneous_identity_and_steps():
    r = QueueRates(1, 1)
    for t in (0.3, 2.0, 17.0):
        assert survival_inhomogeneous(r, RateSchedule.identity(), 1, t) == survival_homogeneous(r, 1, t)
        assert survival_inhomogeneous(r, HALVES, 1, t) == pytest.approx(
            survival_homogeneous(r, 1, float(a_of_t(HALVES, t))))


def test_inhomogeneous_against_thinning():
    sched = RateSchedule.steps([1.7, 1.1, 0.3, 0.9], 2.0)
    r = QueueRates(1.0, 1.2)
    n = 100_000
    rng = np.random.default_rng(3)
    draws = thinning_extinction_times(r, sched, 2, n, rng, cap=5.0)
    for t in (0.5, 1.0, 2.0):
        exact = survival_inhomogeneous(r, sched, 2, t)
        emp = float(np.mean(draws > t))
        assert abs(emp - exact) <= 3 * math.sqrt(exact * (1 - exact) / n)


def test_simulate_extinction():
    r = QueueRates(1, 1)
    assert simulate_extinction(r, RateSchedule.identity(), 0, 1, 10.0).time == 0.0
    a = simulate_extinction(r, HALVES, 3, 42, 1e4)
    b = simulate_extinction(r, HALVES, 3, 42, 1e4)
    assert a == b
    assert a.path_peak >= 3


def test_supercritical_extinction_frequency():
    rng = np.random.default_rng(8)
    n = 200_000
    draws = sample_extinction_times(QueueRates(2, 1), RateSchedule.identity(), 2, n, rng, cap=100.0)
    freq = float(np.isfinite(draws).mean())
    assert abs(freq - 0.25) <= 3 * math.sqrt(0.25 * 0.75 / n)
