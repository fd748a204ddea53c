"""Balanced books and heavy tails.

With equal arrival and depletion rates a queue survives past ``t`` with
probability of order ``t^-1/2``, and the time to the next price change has
tail ``c0 / t``.  Counts then grow like ``t / log t`` and sums of such times
like ``n log n``, with a slow logarithmic approach that this script shows.
"""
import math

import numpy as np

from levelone import analytics
from levelone.lob import ModelConfig, RedrawDistribution, sample_tau1
from levelone.verification import pareto_sampler

cfg = ModelConfig.symmetric(1.0, 1.0, f=RedrawDistribution.degenerate(1, 1))
lc = analytics.limit_constants(cfg)
print(f"regime {lc.regime}, c0 = {lc.c0:.6f} (1/pi = {1 / math.pi:.6f})")
for T in (1e2, 1e3, 1e4):
    print(f"T={T:7.0f}  T P(tau1>T) exact {T * float(analytics.tau1_survival(cfg, 1, 1, T)):.4f}")
draws = sample_tau1(cfg, 1, 1, seed=0, size=2_000_000, cap=1e3)
p = np.mean(draws > 1e3)
print(f"simulated 1e3 P(tau1>1e3) = {1e3 * p:.4f} +- {1e3 * math.sqrt(p / draws.size):.4f}")

rng = np.random.default_rng(1)
draw = pareto_sampler(1.0)
print("\n      n   median V_n/(n log n)   1 + 1.3/log n")
for n in (10**3, 10**4, 10**5):
    med = np.median([draw(rng, n).sum() / (n * math.log(n)) for _ in range(100)])
    print(f"{n:7d}   {med:.4f}                 {1 + 1.3 / math.log(n):.4f}")
