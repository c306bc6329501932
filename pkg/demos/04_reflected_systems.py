"""Brownian motions reflected off a wall and off each other, compared with flat LPP."""
import numpy as np

from flatlpp.lpp import flat_lpp_field, gen_environment
from flatlpp.reflected import sample_path_bundle, triangular_sup_trajectory, wall_trajectory, z_slopes
from flatlpp.stats import ks_one_sample, ks_two_sample

# n = 1: the reflected motion at a large time is Exp(2 alpha)
a = 1.0
y = wall_trajectory(sample_path_bundle((a,), 30.0, 1e-2, seed=1, replicas=10_000), "bridge", record=False)[:, 0]
print("n=1 terminal value vs Exp(2):  KS D =", round(ks_one_sample(y, lambda x: 1 - np.exp(-2 * a * x))[0], 4))

# n = 3: terminal vector vs the top row of the flat LPP field
alpha = (0.7, 1.0, 1.6)
Y = wall_trajectory(sample_path_bundle(alpha, 30.0, 1e-2, seed=2, replicas=10_000), "bridge", record=False)
row = flat_lpp_field(gen_environment(alpha, seed=3, size=100_000)).top_row()
for k in range(3):
    print(f"  Y_{k + 1}(30) vs G(1,{3 - k}):  KS D = {ks_two_sample(Y[:, k], row[:, k])[0]:.4f}")

# law of large numbers for the triangular array
T = 200.0
Z, _ = triangular_sup_trajectory(sample_path_bundle(alpha, T, 1e-2, seed=4, replicas=100), "grid")
for key, slope in z_slopes(alpha).items():
    print(f"  Z{key}(T)/T = {np.mean(Z[key]) / T:+.3f}   predicted {slope:+.3f}")
