"""How long does a queue at the best quote last?

Each side of the book is a birth-death queue: limit orders arrive at rate
``lam``, market orders and cancellations remove one unit at rate ``mu``.
This script compares the closed-form survival curve with simulation, and
shows that an intraday activity profile only reshapes the clock.
"""
import numpy as np

from levelone.birth_death import (QueueRates, RateSchedule, extinction_probability,
                                  sample_extinction_times, survival_grid)

rng = np.random.default_rng(0)
ts = np.array([0.5, 1.0, 2.0, 5.0, 20.0])

for lam, mu in [(1.0, 1.0), (1.0, 2.0)]:
    r = QueueRates(lam, mu)
    exact = survival_grid(r, [3], ts)[:, 0]
    draws = sample_extinction_times(r, RateSchedule.identity(), 3, 200_000, rng, cap=25.0)
    emp = (draws[:, None] > ts).mean(axis=0)
    print(f"lam={lam}, mu={mu}, x=3")
    for t, e, m in zip(ts, exact, emp):
        print(f"  t={t:5.1f}  exact={e:.4f}  simulated={m:.4f}")

# a queue that grows on average still empties with probability (mu/lam)^x
r = QueueRates(2.0, 1.0)
print("\nsupercritical queue, x=3: P(ever empty) =", extinction_probability(r, 3))

# busy mornings and quiet afternoons: the operational clock A_t absorbs the profile
sched = RateSchedule([0.0, 1.0, 2.0, 3.0], [1.6, 0.4, 1.2, 0.8], period=4.0)
r = QueueRates(1.0, 1.5)
fast = sample_extinction_times(r, sched, 2, 100_000, rng, cap=1e3)
flat = sample_extinction_times(r, RateSchedule.identity(), 2, 100_000, rng, cap=1e3)
print("\nmedian extinction time, profiled clock :", np.median(fast).round(3))
print("median extinction time, identity clock :", np.median(flat).round(3))
print("median of A(sigma) under the profile   :", np.median(sched.integral(fast)).round(3))
