"""The verification toolbox on textbook cases."""
import numpy as np

from flatlpp.rng import substream
from flatlpp.stats import bootstrap_ci, chi2_density_fit, energy_distance, ks_one_sample, ks_two_sample

g = substream(0, "demo-stats")
x = g.exponential(0.5, 10_000)
print("Exp(2) vs its own CDF:   KS p =", round(ks_one_sample(x, lambda t: 1 - np.exp(-2 * t))[1], 3))
print("Exp(2) vs Exp(1) CDF:    KS p =", ks_one_sample(x, lambda t: 1 - np.exp(-t))[1])
print("two Exp(1) batches:      KS p =", round(ks_two_sample(g.exponential(size=5000), g.exponential(size=5000))[1], 3))
print("chi-square vs 2e^{-2x}:  p =", round(chi2_density_fit(x, lambda t: 2 * np.exp(-2 * t), support=(0, np.inf))[1], 3))
a, b = g.normal(size=(1000, 2)), g.normal(size=(1000, 2)) + [0.3, 0.0]
print("energy distance, shifted Gaussian: stat = %.4f, p = %.4f" % energy_distance(a, b, permutations=499))
print("95%% bootstrap interval for the mean of x: (%.4f, %.4f)" % bootstrap_ci(x))
