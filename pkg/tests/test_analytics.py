import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from levelone import analytics as A
from levelone._walks import race
from levelone.birth_death import QueueRates, RateSchedule, survival_homogeneous
from levelone.lob import ModelConfig, RedrawDistribution, sample_tau1, simulate
from levelone.verification import mc_pup

PI_HAT = [[0.4731177, 0.5268512], [0.5241391, 0.475891]]


# --- probability of an up-move ------------------------------------------------

@pytest.mark.parametrize("x", [1, 2, 7])
@pytest.mark.parametrize("lam,mu", [(1.0, 1.0), (1.0, 2.0), (0.3, 0.9)])
def test_pup_symmetric_is_half(x, lam, mu):
    r = QueueRates(lam, mu)
    assert A.p_up(x, x, r, r) == pytest.approx(0.5, abs=1e-12)


def test_pup_frozen_oracle(oracles):
    ra, rb = QueueRates(1.0, 1.5), QueueRates(0.8, 1.2)
    ref = oracles["p_up x=3 y=2 ask=(1,1.5) bid=(0.8,1.2)"]
    assert A.p_up(3, 2, ra, rb, method="integral") == pytest.approx(ref, abs=1e-10)
    assert A.p_up(3, 2, ra, rb, method="integration") == pytest.approx(ref, abs=1e-10)


def test_pup_near_critical_against_races():
    r = QueueRates(1.0 - 1e-6, 1.0)
    p = A.p_up(2, 1, r, r)
    p_mc, se = mc_pup(2, 1, r, r, 1_000_000, 21)
    assert abs(p - p_mc) <= 3 * se
    # the down-move probability is the mirrored up-move probability
    assert A.p_up(1, 2, r, r) == pytest.approx(1.0 - p, abs=1e-9)


def test_pup_complement_general_rates():
    ra, rb = QueueRates(0.7, 1.1), QueueRates(1.0, 1.6)
    for x, y in ((1, 1), (3, 2), (2, 5)):
        assert A.p_up(x, y, ra, rb) + A.p_up(y, x, rb, ra) == pytest.approx(1.0, abs=1e-10)


def test_pup_deep_bid():
    r = QueueRates(1.0, 1.0)
    assert A.p_up(50, 1, r, r, method="integration") > 0.97


def test_pup_matrix_matches_scalar():
    ra, rb = QueueRates(1.0, 2.0), QueueRates(1.2, 1.5)
    m = A.p_up_matrix([1, 2, 4], [1, 3], ra, rb)
    for i, x in enumerate((1, 2, 4)):
        for j, y in enumerate((1, 3)):
            assert m[i, j] == pytest.approx(A.p_up(x, y, ra, rb, method="integral"), abs=1e-10)


def test_pup_large_y_uses_stable_route():
    ra, rb = QueueRates(0.2, 1.0), QueueRates(0.5, 1.0)
    p = A.p_up(5, 12, ra, rb)
    assert p == pytest.approx(A.p_up(5, 12, ra, rb, method="integration"), abs=1e-12)
    assert 0.0 <= p <= 1.0


def test_pup_printed_exponent_disagrees_with_simulation():
    # the displayed prefactor (mu_a/lam_a)^y instead of ^(y/2)
    ra, rb = QueueRates(1.0, 2.0), QueueRates(1.0, 2.0)
    p_mc, se = mc_pup(2, 1, ra, rb, 200_000, 22)
    assert abs(A.p_up(2, 1, ra, rb) - p_mc) <= 3 * se
    assert abs(A._p_up_printed_exponent(2, 1, ra, rb) - p_mc) > 20 * se


def test_pup_rejects_bad_input():
    r = QueueRates(1.0, 1.0)
    with pytest.raises(ValueError):
        A.p_up(0, 1, r, r)
    with pytest.raises(ValueError):
        A.p_up(1, 1, QueueRates(2.0, 1.0), r)
    with pytest.raises(ValueError):
        A.p_up(1, 1, r, r, method="nope")


# --- first price change -------------------------------------------------------

def test_tau1_survival_basics():
    cfg = ModelConfig.symmetric(1.0, 1.0)
    assert A.tau1_survival(cfg, 1, 1, 0.0) == 1.0
    for t in (0.5, 4.0, 60.0):
        one = survival_homogeneous(QueueRates(1, 1), 1, t)
        assert A.tau1_survival(cfg, 1, 1, t) == pytest.approx(one ** 2, rel=1e-9)


def test_tau1_tail_critical_constant():
    cfg = ModelConfig.symmetric(1.0, 1.0)
    for T in (1e2, 1e4):
        assert T * A.tau1_tail(cfg, 1, 1, T) == pytest.approx(1 / math.pi, rel=1e-12)
    assert 1e5 * A.tau1_survival(cfg, 1, 1, 1e5) == pytest.approx(1 / math.pi, rel=1e-4)


def test_tau1_tail_one_supercritical_side():
    cfg = ModelConfig(1.0, QueueRates(2.0, 1.0), QueueRates(1.0, 1.0))
    T = 1e6
    printed = math.sqrt(T) * A.tau1_tail(cfg, 1, 1, T)
    assert printed == pytest.approx(1 / (2 * math.pi), rel=1e-12)
    corrected = math.sqrt(T) * A.tau1_tail(cfg, 1, 1, T, printed=False)
    exact = math.sqrt(T) * A.tau1_survival(cfg, 1, 1, T)
    assert corrected / printed == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    assert exact == pytest.approx(corrected, rel=1e-4)


def test_tau1_tail_subcritical_ratio_tends_to_one():
    cfg = ModelConfig(1.0, QueueRates(0.8, 1.0), QueueRates(0.6, 1.0))
    gaps = [abs(A.tau1_survival(cfg, 2, 1, T) / A.tau1_tail(cfg, 2, 1, T) - 1) for T in (50, 200, 800)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] < 0.01


def test_expected_tau1_oracles(oracles):
    r = QueueRates(1.0, 4.0)
    e = A.expected_tau1_given(1, 1, r, r)
    assert e == pytest.approx(oracles["E tau1 x=1 y=1 rates (1,4)"], rel=1e-9)
    rng = np.random.default_rng(23)
    n = 1_000_000
    d, _ = race(np.ones(n, int), np.ones(n, int), (1.0, 4.0), (1.0, 4.0), np.inf, rng)
    assert abs(d.mean() - e) <= 3 * d.std() / math.sqrt(n)


def test_expected_tau1_bound_and_monotonicity():
    ra, rb = QueueRates(1.0, 2.0), QueueRates(1.0, 3.0)
    f = RedrawDistribution.geometric(2, 3, truncate=40)
    e = A.expected_tau1_homogeneous(f, ra, rb)
    assert e <= f.gamma1(ra, rb) / max(ra.C, rb.C)
    vals = [A.expected_tau1_given(x, x + 1, ra, rb) for x in (1, 2, 4, 8)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        A.expected_tau1_given(1, 1, QueueRates(1, 1), QueueRates(1, 1))


def test_epoch_moments_against_races():
    ra, rb = QueueRates(1.0, 1.4), QueueRates(0.8, 1.5)
    x, y = 2, 3
    em = A.epoch_moments(RedrawDistribution.degenerate(x, y), ra, rb)
    rng = np.random.default_rng(24)
    n = 1_000_000
    d, up = race(np.full(n, x), np.full(n, y), (rb.lam, rb.mu), (ra.lam, ra.mu), np.inf, rng)
    xi = np.where(up, 1.0, -1.0)
    assert abs(d.mean() - em.mean_tau) <= 3 * d.std() / math.sqrt(n)
    assert abs(xi.mean() - em.mean_xi) <= 3 * xi.std() / math.sqrt(n)
    assert d.var() == pytest.approx(em.var_tau, rel=0.03)
    cov = np.mean((xi - xi.mean()) * (d - d.mean()))
    se = np.std((xi - xi.mean()) * (d - d.mean())) / math.sqrt(n)
    assert abs(cov - em.cov_xi_tau) <= 3.5 * se


# --- limit constants ----------------------------------------------------------

def test_c0_critical_symmetric():
    cfg = ModelConfig.symmetric(1.0, 1.0, f=RedrawDistribution.degenerate(1, 1))
    lc = A.limit_constants(cfg)
    assert lc.regime == "critical" and lc.c0 == pytest.approx(1 / math.pi, rel=1e-15)


def test_c1_and_clock_speed():
    base = ModelConfig.symmetric(1.0, 2.0, f=RedrawDistribution.geometric(2, 2, 30))
    fast = ModelConfig.symmetric(1.0, 2.0, f=base.f, schedule=RateSchedule.steps([2.0], 1.0))
    assert A.limit_constants(fast).c1 == pytest.approx(0.5 * A.limit_constants(base).c1, rel=1e-14)


@pytest.mark.parametrize("h", [2.0, 4.0, 3.0, 0.37])
def test_constants_scaling_invariance(h):
    f = RedrawDistribution.geometric(2, 3, truncate=30)
    sched = RateSchedule.steps([1.5, 0.5], 2.0)
    for lam, mu in ((1.0, 1.0), (1.0, 1.7)):
        base = ModelConfig.symmetric(lam, mu, f=f, schedule=sched)
        sc = ModelConfig(1.0, base.rates_ask.scaled(1 / h), base.rates_bid.scaled(1 / h),
                         sched.scaled(h), f)
        a, b = A.limit_constants(base), A.limit_constants(sc)
        if a.regime == "critical":
            assert b.c0 == pytest.approx(a.c0, rel=1e-13)
        else:
            assert b.c1 == pytest.approx(a.c1, rel=1e-12)


def test_c1_against_simulated_rate_with_sign_dependent_redraws():
    f = RedrawDistribution.geometric(1.5, 4, truncate=40)
    cfg = ModelConfig(1.0, QueueRates(0.8, 1.2), QueueRates(0.9, 1.1), f=f, f_tilde=f.swapped())
    lc = A.limit_constants(cfg)
    rec = simulate(cfg, 200_000.0, seed=25)
    assert rec.n_jumps / rec.horizon == pytest.approx(1 / lc.c1, rel=0.02)
    sc = A.sign_chain(cfg.f, cfg.f_tilde, cfg.rates_ask, cfg.rates_bid)
    s = rec.directions > 0
    p_uu = np.mean(s[1:][s[:-1]])
    assert p_uu == pytest.approx(sc.Pi[1, 1], abs=0.01)


# --- sign chain ---------------------------------------------------------------

def test_sign_chain_iid_case():
    st_ = A.sign_chain_from_matrix([[0.5, 0.5], [0.5, 0.5]])
    assert st_.nu == 0.5 and st_.sigma2 == pytest.approx(1.0) and st_.mean_xi == 0.0


def test_sign_chain_reported_matrix():
    st_ = A.sign_chain_from_matrix(PI_HAT, 0.01)
    assert st_.nu == pytest.approx(0.4987, abs=5e-4)
    # the variance formula gives about 0.95 delta, not the reported 0.0066
    assert math.sqrt(st_.sigma2) == pytest.approx(0.0095, abs=1e-4)


def test_sign_chain_rejects_degenerate():
    with pytest.raises(ValueError):
        A.sign_chain_from_matrix([[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        A.sign_chain_from_matrix([[1, 0], [0, 1]])
    with pytest.raises(ValueError):
        A.sign_chain_from_matrix([[0.5, 0.6], [0.5, 0.5]])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.02, 0.98), st.floats(0.02, 0.98))
def test_sign_chain_closed_form_equals_series(a, b):
    Pi = [[1 - a, a], [b, 1 - b]]
    s = A.sign_chain_from_matrix(Pi)
    eta = 1 - a - b
    if abs(eta) < 0.6:  # the 64-term series truncates at eta^64
        assert s.sigma2 == pytest.approx(s.sigma2_series, rel=1e-9, abs=1e-12)


def test_sign_chain_variance_against_simulation():
    Pi = np.array([[0.35, 0.65], [0.6, 0.4]])
    s = A.sign_chain_from_matrix(Pi)
    rng = np.random.default_rng(26)
    m, n = 4000, 4000
    nu = s.nu
    state = (rng.random(m) >= nu).astype(int)
    total = np.zeros(m)
    for _ in range(n):
        total += np.where(state == 1, 1.0, -1.0)
        state = (rng.random(m) < Pi[state, 1]).astype(int)
    v = np.var((total - n * s.mean_xi) / math.sqrt(n), ddof=1)
    assert abs(v - s.sigma2) <= 3 * s.sigma2 * math.sqrt(2 / (m - 1))


def test_sign_chain_from_model_symmetric():
    r = QueueRates(1.0, 1.3)
    f = RedrawDistribution.geometric(2, 2, truncate=30)
    s = A.sign_chain(f, f, r, r)
    assert s.nu == pytest.approx(0.5, abs=1e-12)


def test_sigma_tilde():
    assert A.sigma_tilde(0.0066 ** 2, 0.0026, 1 / 0.6194786) == pytest.approx(0.0053, abs=1e-4)
    assert A.sigma_tilde(2.0, 0.0, 4.0) == pytest.approx(math.sqrt(2.0) / 2.0)
    with pytest.raises(ValueError):
        A.sigma_tilde(1.0, 0.0, 0.0)


def test_sigma_tilde_depends_on_clock_only_through_v():
    f = RedrawDistribution.geometric(2, 2, 30)
    ra, rb = QueueRates(1.0, 1.2), QueueRates(0.9, 1.3)
    out = []
    for sched in (RateSchedule.identity(), RateSchedule.steps([1.6, 0.4, 1.2, 0.8], 100.0)):
        cfg = ModelConfig(1.0, ra, rb, sched, f)
        s = A.sign_chain(f, f, ra, rb)
        out.append(A.sigma_tilde(s.sigma2, s.mean_xi, A.limit_constants(cfg).c1))
    assert out[0] == pytest.approx(out[1], rel=1e-12)


def test_stable_exponent():
    c0, v = 0.3, 1.5
    assert A.stable_exponent(0.0, c0, v) == 0
    assert A.stable_exponent(1.0, c0, v) == pytest.approx(-c0 * v * math.pi / 2)
    assert A.stable_exponent(-2.0, c0, v) == pytest.approx(np.conj(A.stable_exponent(2.0, c0, v)))


# --- meander ------------------------------------------------------------------

def test_meander_normalization_and_ck():
    assert A.meander_mass(0.2, 1.0, 0.6) == pytest.approx(1.0, abs=1e-8)
    lhs, rhs = A.meander_chapman_kolmogorov(0.2, 1.0, 0.45, 0.6, 0.7)
    assert lhs == pytest.approx(rhs, abs=1e-6)


def test_meander_far_from_zero_is_gaussian():
    s, t = 0.1, 0.4
    for x in (4.0, 8.0):
        y = x + 0.3
        g = math.exp(-0.3 ** 2 / (2 * (t - s))) / math.sqrt(2 * math.pi * (t - s))
        assert A.meander_density(s, x, t, y) == pytest.approx(g, rel=1e-3 if x == 4.0 else 1e-9)


def test_meander_generator_check_reports_both():
    g = A.meander_generator_check()
    assert g.residual_reference < 1e-3 * g.scale
    assert not g.printed_consistent
