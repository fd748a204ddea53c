import json
import math

import numpy as np
import pytest
from scipy import stats

from levelone.birth_death import QueueRates, RateSchedule, sample_extinction_times
from levelone.lob import ModelConfig, RedrawDistribution
from levelone import verification as V


def test_suite_report_bookkeeping():
    rep = V.SuiteReport("demo")
    rep.add("ok", 0.1, 1.0, True)
    rep.add("info", 5.0, 1.0, False, required=False)
    assert rep.passed and rep.failures() == []
    other = V.SuiteReport("b", seeds={"b": 3})
    other.add("bad", 2.0, 1.0, False)
    rep.merge(other, "b: ")
    assert not rep.passed and rep.failures()[0].name == "b: bad"
    d = json.loads(json.dumps(rep.to_dict()))
    assert d["seeds"] == {"b: b": 3} and len(d["checks"]) == 3


def test_thinning_at_zero():
    s = V.thinning_simulator(QueueRates(1, 1), RateSchedule.identity(), 0, 10.0, seed=0)
    assert s.time == 0.0


def test_thinning_matches_exact_sampler_identity_schedule():
    r = QueueRates(1.0, 1.5)
    rng = np.random.default_rng(11)
    a = V.thinning_extinction_times(r, RateSchedule.identity(), 2, 20_000, rng, cap=50.0)
    b = sample_extinction_times(r, RateSchedule.identity(), 2, 20_000, rng, cap=50.0)
    a, b = np.minimum(a, 50.0), np.minimum(b, 50.0)
    assert stats.ks_2samp(a, b).statistic < V.ks_critical(a.size, b.size)


def test_thinning_needs_bounded_alpha():
    sched = RateSchedule([0.0, 1.0], [0.0, 0.0], period=2.0)
    with pytest.raises(ValueError):
        V.thinning_extinction_times(QueueRates(1, 1), sched, 1, 10, np.random.default_rng(0), 1.0)


def test_sum_scaling_scaling_with_c():
    r1 = V.check_sum_scaling(1.0, n_grid=(1_000, 10_000), replicas=50, seed=1)
    r2 = V.check_sum_scaling(2.0, n_grid=(1_000, 10_000), replicas=50, seed=1)
    m1 = r1.checks[1].statistic
    m2 = r2.checks[1].statistic
    # statistics are reported relative to c, so doubling c leaves them unchanged
    assert m1 == pytest.approx(m2, rel=1e-12)


def test_sum_scaling_light_tail_sentinel():
    rep = V.check_sum_scaling(1.0, n_grid=(1_000, 10_000), replicas=20,
                          sampler=lambda rng, n: np.ones(n))
    assert not rep.passed
    assert any("hypothesis" in c.name and not c.passed for c in rep.checks)


def test_sum_scaling_rejects_bad_c():
    with pytest.raises(ValueError):
        V.check_sum_scaling(0.0)


def test_psi_below_bound():
    assert V.psi_lambda(0.5, 1.0, 1) <= V.BESSEL_TAIL_CONSTANT
    assert V.BESSEL_TAIL_CONSTANT == pytest.approx(math.exp(-1) / 2 + math.gamma(0.1) / math.pi)


def test_bessel_tail_small_grid():
    assert V.check_bessel_tail((0.5, 3.0), (1, 4), (1.0, 7.0)).passed


def test_mc_pup_symmetric_and_far():
    r = QueueRates(1.0, 1.2)
    p, se = V.mc_pup(3, 3, r, r, 20_000, seed=0)
    assert abs(p - 0.5) <= 3 * se
    # x is the bid queue: a deep bid against a thin ask moves the price up
    p, _ = V.mc_pup(50, 1, r, r, 10_000, seed=0)
    assert p > 0.95
    p, _ = V.mc_pup(1, 50, r, r, 10_000, seed=0)
    assert p < 0.05
    with pytest.raises(ValueError):
        V.mc_pup(1, 1, r, r, 100, seed=0)


def test_simulate_paths_shape():
    cfg = ModelConfig.symmetric(1.0, 1.2, f=RedrawDistribution.degenerate(2, 2))
    N, S = V.simulate_paths(cfg, [10.0, 20.0], 50, np.random.default_rng(0))
    assert N.shape == S.shape == (50, 2)
    assert np.all(N[:, 1] >= N[:, 0])


@pytest.mark.slow
def test_small_diffusion_run_symmetric():
    cfg = ModelConfig.symmetric(1.0, 1.3, delta=0.01, f=RedrawDistribution.degenerate(2, 2))
    rep = V.check_diffusion_limit(cfg, seed=7, n_paths=2000, horizon=2000.0, var_tol=0.12,
                                  lin_tol=0.2)
    assert rep.passed, [(c.name, c.statistic, c.detail) for c in rep.failures()]


def test_run_suite_lookup():
    assert V.run_suite("specfun").passed
    with pytest.raises(KeyError):
        V.run_suite("nope")
