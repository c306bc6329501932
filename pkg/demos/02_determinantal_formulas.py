"""Closed-form invariant densities, transition densities and the top-particle CDF."""
import numpy as np

from flatlpp import determinantal as det

alpha = (0.7, 1.6)
print("invariant density pi at (0.2, 0.9):", det.eval_pi(alpha, (0.2, 0.9)))
print("exact total mass of pi:", det.pi_distinct_normalization(alpha))
print("exact mass of the equal-drift density, n = 1..4:", [str(det.pi_bar_normalization(n)) for n in range(1, 5)])

# transition density of the wall system and its stationarity
x = np.array([0.3, 1.0])
print("r_t(x, y) at t = 0.5:", det.eval_r_t(alpha, 0.5, x, np.array([0.5, 1.4])))

# distribution function of the top particle: Wronskian form vs Toda form
grid = np.linspace(0.5, 6.5, 7)
F = det.eval_cdf_top((1.0, 1.0, 1.0), grid)
G = det.eval_cdf_toda(3, grid)
for xv, a, b in zip(grid, F, G):
    print(f"  x = {xv:3.1f}   F = {a:.10f}   Toda = {b:.10f}")
print("max |Wronskian - Toda| =", float(np.max(np.abs(F - G))))
