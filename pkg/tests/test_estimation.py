import math
import warnings

import numpy as np
import pytest

from levelone import analytics
from levelone.birth_death import QueueRates
from levelone.estimation import (
    EstimationError,
    EventLog,
    PriceLog,
    SchemaError,
    estimate_all,
    estimate_alpha_profile,
    estimate_c1_inv,
    estimate_rates,
    estimate_sign_chain,
    event_log_from_record,
    hf_sigma_tilde,
    ingest_events,
    ingest_prices,
    price_changes,
    price_log_from_record,
    spread_table,
    write_events_log,
    write_prices_log,
)
from levelone.lob import ModelConfig, RedrawDistribution, simulate

from conftest import REFERENCE_AVE, REFERENCE_ROWS

T_D = 23400.0


def _write(path, text):
    path.write_text(text)
    return path


def test_size_normalization(tmp_path):
    log = ingest_events(_write(tmp_path / "e.csv", "day,t,side,kind,size\n1,10,B,L,324\n"))
    assert log.weight[0] == pytest.approx(3.24)
    assert log.daily_totals()[0, 0] == pytest.approx(3.24)


def test_empty_log(tmp_path):
    log = ingest_events(_write(tmp_path / "e.csv", ""))
    assert log.is_empty()
    with pytest.raises(EstimationError):
        estimate_rates(log)


def test_market_and_cancel_feed_departures(tmp_path):
    text = "day,t,side,kind,size\n1,1,A,M,100\n1,2,A,C,200\n1,3,A,L,100\n"
    tot = ingest_events(_write(tmp_path / "e.csv", text)).daily_totals()[0]
    assert tot[3] == pytest.approx(3.0) and tot[1] == pytest.approx(1.0)


@pytest.mark.parametrize("text,msg", [
    ("day,t,side,kind\n", "line 1"),
    ("day,t,side,kind,size\n1,5,X,L,100\n", "line 2"),
    ("day,t,side,kind,size\n1,5,B,L,100\n1,4,B,L,100\n", "line 3"),
    ("day,t,side,kind,size\n1,23400,B,L,100\n", "line 2"),
    ("day,t,side,kind,size\n1,5,B,Q,100\n", "line 2"),
    ("day,t,side,kind,size\n1,5,B,L,-1\n", "line 2"),
    ("day,t,side,kind,size\n1,abc,B,L,1\n", "line 2"),
])
def test_event_schema_errors(tmp_path, text, msg):
    with pytest.raises(SchemaError, match=msg):
        ingest_events(_write(tmp_path / "e.csv", text))


def test_reference_pooled_rates(reference_events):
    est = estimate_rates(ingest_events(reference_events))
    lb, la, mb, ma = REFERENCE_AVE
    assert est.lambda_b == pytest.approx(lb, abs=1e-4)
    assert est.lambda_a == pytest.approx(la, abs=1e-4)
    assert est.mu_b == pytest.approx(mb, abs=1e-4)
    assert est.mu_a == pytest.approx(ma, abs=1e-4)
    assert est.n_days == 5


def test_reference_daily_rows(reference_events):
    log = ingest_events(reference_events)
    daily = log.daily_totals() / log.t_d
    np.testing.assert_allclose(daily, np.array(REFERENCE_ROWS), atol=1e-9)


def test_poisson_rate_recovery():
    rng = np.random.default_rng(1)
    r = 0.8
    t = np.sort(rng.uniform(0, T_D, rng.poisson(r * T_D)))
    log = EventLog(np.ones(t.size, int), t, np.zeros(t.size, int), np.ones(t.size), T_D)
    est = estimate_rates(log)
    assert abs(est.lambda_b - r) <= 3 * math.sqrt(r / T_D)
    assert any("zero count" in f for f in est.flags)


def test_lot_invariance(tmp_path, reference_events):
    a = estimate_rates(ingest_events(reference_events))
    text = reference_events.read_text().splitlines()
    doubled = [text[0]] + [",".join(l.split(",")[:4] + [str(2 * float(l.split(",")[4]))]) for l in text[1:]]
    b = estimate_rates(ingest_events(_write(tmp_path / "d.csv", "\n".join(doubled) + "\n"), base_lot=200))
    assert (a.lambda_a, a.mu_b) == pytest.approx((b.lambda_a, b.mu_b), rel=1e-12)


def test_alpha_profile_shapes():
    rng = np.random.default_rng(2)
    t = np.sort(rng.uniform(0, T_D, 400_000))
    log = EventLog(np.ones(t.size, int), t, np.zeros(t.size, int), np.ones(t.size), T_D)
    prof = estimate_alpha_profile(log, 10)
    np.testing.assert_allclose(prof.values, 1.0, atol=0.03)
    # twice the intensity in the first half of the day
    first = rng.uniform(0, T_D / 2, 200_000)
    second = rng.uniform(T_D / 2, T_D, 100_000)
    t = np.sort(np.r_[first, second])
    log = EventLog(np.ones(t.size, int), t, np.zeros(t.size, int), np.ones(t.size), T_D)
    prof = estimate_alpha_profile(log, 2)
    np.testing.assert_allclose(prof.values, [4 / 3, 2 / 3], rtol=0.01)
    with pytest.raises(ValueError):
        estimate_alpha_profile(log, 7)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        estimate_alpha_profile(EventLog(np.ones(1, int), np.zeros(1), np.zeros(1, int), np.ones(1), T_D), 2)
        assert any("empty bin" in str(x.message) for x in w)


def _prices(mids, times=None, day=1, spread=None):
    mids = np.asarray(mids, dtype=float)
    t = np.arange(mids.size, dtype=float) if times is None else np.asarray(times, dtype=float)
    spr = np.full(mids.size, np.nan) if spread is None else np.asarray(spread, dtype=float)
    return PriceLog(np.full(mids.size, day), t, mids, spr, T_D)


def test_price_changes_and_chain():
    mids = [0.0] + [1.0 if k % 2 == 0 else 0.0 for k in range(10)]
    pl = _prices(mids)
    ch = price_changes(pl, 1.0)
    assert list(ch[1][1]) == [1, -1] * 5
    Pi, nu = estimate_sign_chain(pl, 1.0)
    np.testing.assert_array_equal(Pi, [[0, 1], [1, 0]])
    assert nu == 0.5
    with pytest.raises(ValueError):
        analytics.sign_chain_from_matrix(Pi)


def test_undefined_row():
    pl = _prices([0, 1, 2, 3, 4])
    with pytest.raises(EstimationError, match="never left"):
        estimate_sign_chain(pl, 1.0)


def test_sub_tick_moves_are_ignored():
    pl = _prices([0.0, 0.3, 0.2, 0.45, 0.5, 0.4])
    assert price_changes(pl, 1.0)[1][1].tolist() == [1]


def test_c1_inverse():
    mids = np.cumsum(np.r_[0.0, np.where(np.arange(100) % 2 == 0, 1.0, -1.0)])
    pl = PriceLog(np.ones(101, int), np.linspace(0, 199, 101), mids, np.full(101, np.nan), 200.0)
    assert estimate_c1_inv(pl, 1.0) == pytest.approx(0.5)


def test_simulated_model_chain_and_rate():
    f = RedrawDistribution.geometric(2, 2, truncate=40)
    cfg = ModelConfig.symmetric(1.0, 1.3, f=f)
    rec = simulate(cfg, 10 * T_D, seed=3)
    pl = price_log_from_record(rec, T_D)
    Pi, nu = estimate_sign_chain(pl, 1.0)
    n = rec.n_jumps
    assert abs(nu - 0.5) <= 3 * 0.5 / math.sqrt(n)
    rate = estimate_c1_inv(pl, 1.0)
    assert rate == pytest.approx(1 / analytics.limit_constants(cfg).c1, rel=0.05)


def _brownian(sig, days, rng, dt=1.0):
    n = int(T_D / dt)
    rows = []
    for d in range(1, days + 1):
        w = np.r_[0.0, np.cumsum(rng.normal(0, sig * math.sqrt(dt), n))]
        rows.append((np.full(n + 1, d), np.arange(n + 1) * dt, w))
    return PriceLog(np.concatenate([r[0] for r in rows]), np.concatenate([r[1] for r in rows]),
                    np.concatenate([r[2] for r in rows]), np.full((n + 1) * days, np.nan), T_D)


def test_hf_volatility_recovery():
    rng = np.random.default_rng(4)
    pl = _brownian(0.0053, 50, rng)
    hv = hf_sigma_tilde(pl, 600.0)
    assert hv.pooled == pytest.approx(0.0053, rel=0.05)
    est = [hf_sigma_tilde(pl, w).pooled for w in (60.0, 300.0, 600.0)]
    for w, e in zip((60.0, 300.0, 600.0), est):
        n = 50 * int(T_D // w)
        assert abs(e / 0.0053 - 1) <= 3 / math.sqrt(2 * n)
    assert hf_sigma_tilde(_prices(np.zeros(30), np.arange(30) * 1000.0), 600.0).pooled == 0.0


def test_spread_table():
    t = np.arange(0, T_D, 60.0)
    assert spread_table(_prices(np.zeros(t.size), t, spread=np.ones(t.size))).average[0] == 1.0
    spr = np.where(np.arange(t.size) % 10 == 0, 2.0, 1.0)
    tab = spread_table(_prices(np.zeros(t.size), t, spread=spr))
    np.testing.assert_allclose(tab.average, [0.9, 0.1, 0.0], atol=1e-12)
    text = tab.format()
    lines = text.splitlines()
    assert "Ave." in lines[0]
    assert [l[:8].strip() for l in lines[1:]] == ["1", "2", "> 2"]
    assert "90.0%" in lines[1] and "10.0%" in lines[2]


def test_price_file_round_trip(tmp_path):
    pl = _prices([1.0, 1.01, 1.0], [0.0, 5.0, 9.0], spread=[1, 2, np.nan])
    write_prices_log(pl, tmp_path / "p.csv")
    back = ingest_prices(tmp_path / "p.csv")
    np.testing.assert_allclose(back.mid, pl.mid)
    assert np.isnan(back.spread[2])
    with pytest.raises(SchemaError):
        ingest_prices(_write(tmp_path / "bad.csv", "day,t\n"))


def test_record_to_logs_round_trip(tmp_path):
    cfg = ModelConfig(1.0, QueueRates(0.8, 1.2), QueueRates(0.9, 1.1),
                      f=RedrawDistribution.geometric(2, 3, truncate=30))
    rec = simulate(cfg, 2 * 600.0, seed=5, record_events=True)
    log = event_log_from_record(rec, 600.0)
    write_events_log(log, tmp_path / "e.csv")
    back = ingest_events(tmp_path / "e.csv", t_d=600.0)
    np.testing.assert_allclose(back.daily_totals(), log.daily_totals())
    est = estimate_all(back, price_log_from_record(rec, 600.0))
    assert est.n_days == 2 and est.c1_inv_hat > 0
