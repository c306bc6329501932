"""Flat last passage percolation on the triangle and its exact distribution function."""
import numpy as np

from flatlpp import determinantal as det
from flatlpp.lpp import flat_lpp_bruteforce, flat_lpp_field, gen_environment, p2p_symmetric_lpp

alpha = (0.7, 1.0, 1.6)
env = gen_environment(alpha, "exponential", seed=1)
G = flat_lpp_field(env)
print("one environment, G(1,1) by dynamic programming:", G.at(1, 1))
print("same by enumerating all flat paths:          ", flat_lpp_bruteforce(env.weights, env.n))
print("point-to-point LPP on the symmetrised square / 2:", p2p_symmetric_lpp(env) / 2)

# many environments: G(1,1) against the exact distribution function
g = np.sort(flat_lpp_field(gen_environment(alpha, seed=2, size=100_000)).at(1, 1))
ecdf = np.arange(1, g.size + 1) / g.size
F = det.eval_cdf_top(alpha, g)
print("sup |F - ECDF| over 1e5 samples:", float(np.max(np.abs(F - ecdf))))
for q in (0.1, 0.5, 0.9):
    x = np.quantile(g, q)
    print(f"  empirical {q:.1f}-quantile {x:.3f}:  F = {float(det.eval_cdf_top(alpha, x)):.4f}")
