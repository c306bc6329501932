"""Log-gamma and Brownian polymers: the positive-temperature version of the wall system."""
import numpy as np
from scipy import stats

from flatlpp.lpp import gen_environment
from flatlpp.polymer import integrated_partition, loggamma_partition_field, zero_temp_scan
from flatlpp.reflected import sample_path_bundle, wall_trajectory
from flatlpp.stats import ks_one_sample, ks_two_sample

# Dufresne: 2 int_0^inf exp(2(B_s - mu s)) ds is inverse gamma with shape mu
mu = 1.0
v = 2 * integrated_partition(sample_path_bundle((mu,), 400.0, 1e-2, seed=1, replicas=5000), beta=2.0).value
print("Dufresne check, KS D =", round(ks_one_sample(v, stats.invgamma(mu).cdf)[0], 4))

# int_0^inf Z_2 against twice the flat log-gamma partition function
alpha = (0.8, 1.3)
ip = integrated_partition(sample_path_bundle(alpha[::-1], 400.0, 1e-2, seed=2, replicas=5000))
zeta = np.exp(loggamma_partition_field(gen_environment(alpha, "inverse_gamma", seed=3, size=50_000)).at(1, 1))
print("Brownian vs log-gamma flat polymer, KS D =", round(ks_two_sample(ip.value, 2 * zeta)[0], 4))

# zero temperature: (1/beta) log Y approaches the reflected system on the same paths
paths = sample_path_bundle((0.7, 1.6), 1.0, 1e-3, seed=4, replicas=200)
vals, ref = zero_temp_scan(paths, (1.0, 2.0, 4.0, 8.0, 16.0, 32.0))
for b, val in zip((1, 2, 4, 8, 16, 32), vals):
    print(f"  beta = {b:2d}: mean gap to the wall system = {np.mean(ref - val):.4f}")
print("  beta = inf value equals the grid wall system:",
      bool(np.array_equal(ref, wall_trajectory(paths, "grid", record=False)[..., -1])))
