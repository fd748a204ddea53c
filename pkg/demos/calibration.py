"""Calibrating the model from order-flow and price records.

Synthetic days are generated with known rates and an intraday profile,
written to the CSV layouts the estimators ingest, and read back.
"""
import tempfile
from pathlib import Path

from levelone import analytics
from levelone.estimation import estimate_all, estimate_alpha_profile, ingest_events, ingest_prices
from levelone.estimation import event_log_from_record, price_log_from_record
from levelone.estimation import write_events_log, write_prices_log
from levelone.verification import roundtrip_config
from levelone.lob import simulate

cfg = roundtrip_config()
t_d = cfg.schedule.period
rec = simulate(cfg, 5 * t_d, seed=3, record_events=True)

with tempfile.TemporaryDirectory() as tmp:
    ev, pr = Path(tmp) / "events.csv", Path(tmp) / "prices.csv"
    write_events_log(event_log_from_record(rec, t_d), ev)
    write_prices_log(price_log_from_record(rec, t_d), pr)
    log = ingest_events(ev, t_d=t_d)
    est = estimate_all(log, ingest_prices(pr, t_d=t_d), delta=cfg.delta, windows=[600.0])
    prof = estimate_alpha_profile(log, len(cfg.schedule.values))

print("rate        true     estimated")
for k, true in [("lambda_a", cfg.rates_ask.lam), ("mu_a", cfg.rates_ask.mu),
                ("lambda_b", cfg.rates_bid.lam), ("mu_b", cfg.rates_bid.mu)]:
    print(f"{k:9s} {true:8.4f}   {getattr(est, k):8.4f}")
print("alpha profile true     :", [float(v) for v in cfg.schedule.values])
print("alpha profile estimated:", [round(float(v), 3) for v in prof.values])
print("1/c1 estimated:", round(est.c1_inv_hat, 4),
      " analytic:", round(1 / analytics.limit_constants(cfg).c1, 4))
print("P(up) of the sign chain:", round(est.nu_hat, 4))
