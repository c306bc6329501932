"""Matrix models whose top eigenvalue has the flat LPP law."""
import numpy as np

from flatlpp import determinantal as det
from flatlpp.lpp import flat_lpp_field, gen_environment
from flatlpp.matrices import sample_loe, sample_sym_lue
from flatlpp.stats import ks_one_sample, ks_two_sample

N = 50_000
loe = sample_loe(3, seed=1, size=N)[:, -1]
g = 4 * flat_lpp_field(gen_environment((1.0, 1.0, 1.0), seed=2, size=N)).at(1, 1)
print("LOE top eigenvalue vs 4 G(1,1):  KS D =", round(ks_two_sample(loe, g)[0], 4))

alpha = (0.7, 1.0, 1.6)
xm = sample_sym_lue(alpha, seed=3, size=N)[:, -1]
D, _ = ks_one_sample(xm, lambda x: det.eval_cdf_top(alpha, np.maximum(x, 0) / 2))
print("perturbed symmetric LUE top eigenvalue vs 2 G(1,1):  KS D =", round(D, 4))
print("(the supremum of the drifted Hermitian motion is criterion 3: `flatlpp verify sup_lambda_max`)")
