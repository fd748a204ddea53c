"""Simulating the level-1 book and its diffusive price.

A book with depletion-dominated queues prices like Brownian motion at large
scales.  Simulated terminal variance is compared with the closed-form
volatility and with the exact renewal-reward variance of the epoch sums.
"""
import math

import numpy as np

from levelone import analytics
from levelone.lob import ModelConfig, RedrawDistribution, price_path, simulate
from levelone.verification import simulate_paths

cfg = ModelConfig.symmetric(1.0, 1.3, delta=0.01, f=RedrawDistribution.geometric(2, 2, truncate=60))
rec = simulate(cfg, 600.0, seed=1)
pp = price_path(rec)
print(f"one 10 minute path: {rec.n_jumps} price changes, final price {pp.price(600.0):+.2f}")

lc = analytics.limit_constants(cfg)
sc = analytics.sign_chain(cfg.f, cfg.f_tilde, cfg.rates_ask, cfg.rates_bid, cfg.delta)
sig = analytics.sigma_tilde(sc.sigma2, sc.mean_xi, lc.c1)
em = analytics.epoch_moments(cfg.f, cfg.rates_ask, cfg.rates_bid, cfg.delta)
print(f"regime {lc.regime}, mean epoch c1={lc.c1:.4f}, volatility {sig:.5f}")
print(f"exact renewal-reward volatility {math.sqrt(em.renewal_reward_variance):.5f}")

T = 2000.0
N, S = simulate_paths(cfg, [T], 3000, np.random.default_rng(2))
W = (S[:, 0] - sc.mean_xi / lc.c1 * T) / math.sqrt(T)
print(f"simulated std of S_T/sqrt(T) over 3000 paths: {W.std(ddof=1):.5f}")
