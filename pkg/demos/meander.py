"""The price conditioned to stay above its start.

Its scaling limit is the Brownian meander.  The transition density is
checked for total mass and for the Chapman-Kolmogorov relation.
"""
import numpy as np

from levelone import analytics

s, x, t = 0.2, 0.5, 0.6
ys = np.linspace(0.0, 3.0, 7)[1:]
print("y     density")
for y, d in zip(ys, analytics.meander_density(s, x, t, ys)):
    print(f"{y:.1f}   {d:.5f}")
print("mass:", round(analytics.meander_mass(s, x, t), 10))
print("density at y=1, direct vs composed through u=0.4:",
      analytics.meander_chapman_kolmogorov(s, x, 0.4, t, 1.0))
