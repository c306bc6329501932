import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.special import gammaln

from flatlpp.lpp import LppError, gen_environment, triangle_cells
from flatlpp.polymer import (GridTooCoarseError, PolymerError, brownian_partition_trajectory, integrated_partition,
                             loggamma_bruteforce, loggamma_partition_field, richardson_change, zero_temp_scan)
from flatlpp.reflected import PathBundle, sample_path_bundle, wall_trajectory
from flatlpp.stats import chi2_density_fit, ks_one_sample


def test_single_cell_field():
    env = gen_environment((1.2,), "inverse_gamma", seed=1, size=5)
    assert np.array_equal(loggamma_partition_field(env).at(1, 1), np.log(env.weights[:, 0]))


def test_unit_weights_count_paths():
    env = gen_environment((1.0,) * 4, "inverse_gamma", seed=0)
    env.weights[:] = 1.0
    assert math.exp(loggamma_partition_field(env).at(1, 1)) == pytest.approx(8.0, rel=1e-14)
    assert loggamma_bruteforce(env.weights, 4) == 8.0


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.3, 3.0), min_size=1, max_size=4), st.integers(0, 2**32))
def test_field_matches_path_sum(alpha, seed):
    env = gen_environment(alpha, "inverse_gamma", seed=seed)
    z = math.exp(loggamma_partition_field(env).at(1, 1))
    assert z == pytest.approx(loggamma_bruteforce(env.weights, env.n), rel=1e-12)


def test_field_local_update():
    env = gen_environment((0.7, 1.0, 1.6), "inverse_gamma", seed=3, size=50)
    f = loggamma_partition_field(env)
    for i, j in triangle_cells(3):
        if i + j < 4:
            expect = np.log(env.weight(i, j)) + np.logaddexp(f.at(i, j + 1), f.at(i + 1, j))
            assert f.at(i, j) == pytest.approx(expect, abs=1e-12)


def test_field_needs_inverse_gamma_triangle():
    with pytest.raises(PolymerError):
        loggamma_partition_field(gen_environment((1.0, 1.0), "exponential", seed=1))


def test_field_needs_triangle_shape():
    env = gen_environment((1.0, 1.0), "inverse_gamma", seed=1)
    env.shape = None
    with pytest.raises(LppError):
        loggamma_partition_field(env)


def _log_invgamma_density(a):
    # y = log W with W ~ InvGamma(a), i.e. y = -log G with G ~ Gamma(a)
    def dens(y):
        with np.errstate(over="ignore"):
            return np.exp(-a * y - np.exp(-y) - gammaln(a))
    return dens


def test_field_conditional_density():
    # given its neighbours, xi_11 - log(e^xi_12 + e^xi_21) is log W_11
    alpha = (0.8, 1.3)
    f = loggamma_partition_field(gen_environment(alpha, "inverse_gamma", seed=11, size=100_000))
    nb = np.logaddexp(f.at(1, 2), f.at(2, 1))
    resid = f.at(1, 1) - nb
    dens = _log_invgamma_density(alpha[0] + alpha[1])
    _, p = chi2_density_fit(resid, dens, bins=20)
    assert p > 0.01
    for half in (nb < np.median(nb), nb >= np.median(nb)):
        _, p = chi2_density_fit(resid[half], dens, bins=15)
        assert p > 0.01


def _zero_paths(n, T, dt):
    return PathBundle.from_increments(np.zeros((n, int(round(T / dt)))), dt)


def test_zero_noise_simplex_volumes():
    res = brownian_partition_trajectory(_zero_paths(3, 2.0, 1e-3))
    Y, Z = np.exp(res["logY"]), np.exp(res["logZ"])
    assert Y[-1] == pytest.approx(8 / 6, rel=1e-5)
    assert Z[-1] == pytest.approx(2.0, rel=1e-5)
    assert Y == pytest.approx([2.0, 2.0, 8 / 6], rel=1e-5)


def test_trajectories_positive_and_finite():
    p = sample_path_bundle((0.7, 1.0, 1.6), 20.0, 1e-2, seed=2, replicas=50)
    res = brownian_partition_trajectory(p, record=True)
    assert np.all(np.isfinite(res["logY"][:, 1:, :]))
    assert np.all(np.isfinite(res["logZ"][:, 1:, :]))
    # Y_k itself fluctuates with the noise; its running integral of Z_n grows
    assert np.all(np.diff(np.logaddexp.accumulate(res["logZ"][..., -1], axis=1), axis=1) > 0)


def test_zero_noise_trajectories_increase():
    logY = brownian_partition_trajectory(_zero_paths(3, 2.0, 1e-2), record=True)["logY"]
    assert np.all(np.diff(logY[1:], axis=0) > 0)


def test_beta_must_be_positive():
    with pytest.raises(PolymerError):
        brownian_partition_trajectory(_zero_paths(1, 1.0, 0.1), beta=0.0)


def test_grid_refinement():
    p = sample_path_bundle((0.7, 1.0, 1.6), 10.0, 1e-3, seed=4, replicas=20)
    assert richardson_change(p) < 0.01
    brownian_partition_trajectory(p, check_tol=0.01)


def test_coarse_grid_is_flagged():
    p = sample_path_bundle((1.0, 1.0), 10.0, 0.5, seed=4, replicas=20)
    with pytest.raises(GridTooCoarseError):
        brownian_partition_trajectory(p, check_tol=1e-3)


def test_dufresne():
    # 2 int_0^inf exp(2(B_s - mu s)) ds is 1/Gamma(mu)
    mu = 1.0
    p = sample_path_bundle((mu,), 400.0, 1e-2, seed=5, replicas=10_000)
    v = 2 * integrated_partition(p, beta=2.0).value
    D, _ = ks_one_sample(v, stats.invgamma(mu).cdf)
    assert D < 0.02


def test_integrated_partition_rejects_nonnegative_drift():
    with pytest.raises(PolymerError):
        integrated_partition(sample_path_bundle((0.0,), 10.0, 0.1, seed=1))
    with pytest.raises(PolymerError):
        integrated_partition(sample_path_bundle((1.0, -0.5), 10.0, 0.1, seed=1))


def test_integrated_partition_horizon_limit():
    with pytest.raises(PolymerError):
        integrated_partition(sample_path_bundle((0.05,), 6.0, 0.1, seed=1, replicas=20), tail_tol=1e-12)


def test_beta_scan_gap_shrinks():
    p = sample_path_bundle((0.7, 1.6), 1.0, 1e-3, seed=6, replicas=200)
    vals, ref = zero_temp_scan(p, (1.0, 2.0, 4.0, 8.0, 16.0))
    gaps = np.stack([ref - v for v in vals])
    assert np.all(np.diff(gaps.mean(axis=1)) < 0)
    assert np.array_equal(ref, wall_trajectory(p, "grid", record=False)[..., -1])


def test_beta_scan_infinite_entry_and_order():
    p = sample_path_bundle((1.0,), 1.0, 1e-2, seed=7, replicas=5)
    vals, ref = zero_temp_scan(p, (1.0, math.inf))
    assert np.array_equal(vals[-1], ref)
    with pytest.raises(PolymerError):
        zero_temp_scan(p, (2.0, 1.0))


def test_beta_scan_zero_noise_tends_to_zero():
    vals, _ = zero_temp_scan(_zero_paths(2, 1.0, 1e-3), (1.0, 10.0, 100.0))
    assert np.all(np.diff(np.abs(vals)) < 0)
    assert abs(vals[-1]) < 0.01
