"""Which way does the price move next?

When one queue empties the price moves by a tick.  The probability that the
ask side goes first has an integral representation; it is compared here
with brute-force races.  The sign of successive moves then forms a two-state
Markov chain whose stationary law and long-run variance follow in closed form.
"""
from levelone import analytics
from levelone.birth_death import QueueRates
from levelone.verification import mc_pup

ask, bid = QueueRates(1.0, 1.5), QueueRates(0.8, 1.2)
print(" x  y   p_up (integral)   p_up (races)")
for x, y in [(1, 1), (3, 2), (2, 5), (8, 3)]:
    p = analytics.p_up(x, y, ask, bid)
    m, se = mc_pup(x, y, ask, bid, 200_000, seed=x * 10 + y)
    print(f"{x:2d} {y:2d}   {p:.5f}          {m:.5f} +- {se:.5f}")

# sign chain estimated from five trading days of a liquid stock
Pi = [[0.4731177, 0.5268512], [0.5241391, 0.475891]]
st = analytics.sign_chain_from_matrix(Pi, delta=0.01)
print(f"\nstationary P(up) = {st.nu:.4f}, sigma = {st.sigma2 ** 0.5:.5f} for a 1 cent tick")
print("volatility from sigma=0.0066, E xi=0.0026, 1/c1=0.6194786:",
      round(analytics.sigma_tilde(0.0066 ** 2, 0.0026, 1 / 0.6194786), 5))
