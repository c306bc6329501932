import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatlpp import determinantal as det
from flatlpp.lpp import flat_lpp_field, gen_environment
from flatlpp.matrices import (HermitianPathConfig, MatrixError, charpoly_eigenvalues, hermitian_path,
                              sample_loe, sample_sym_lue, sup_lambda_max, sym_lue_precisions)
from flatlpp.stats import chi2_ordered_pairs, ks_one_sample, ks_two_sample


@pytest.mark.parametrize("kwargs", [dict(dt=0.0), dict(T=-1.0), dict(drift_diag=(1.0,)),
                                    dict(drift_diag=(1.0, 0.0)), dict(scheme="euler")])
def test_config_validation(kwargs):
    base = dict(n=2, T=1.0, dt=0.1, drift_diag=(1.0, 1.0))
    base.update(kwargs)
    with pytest.raises(MatrixError):
        HermitianPathConfig(**base)


def test_path_is_hermitian():
    H = hermitian_path(HermitianPathConfig(3, 1.0, 0.01, (1.0, 1.0, 1.0), seed=2, replicas=20))
    assert H.shape == (20, 101, 3, 3)
    assert np.max(np.abs(H - np.conj(np.swapaxes(H, -1, -2)))) < 1e-12
    assert np.all(H[:, 0] == 0)


def test_increment_variances():
    cfg = HermitianPathConfig(2, 1.0, 0.01, (1.0, 1.0), seed=3, replicas=5000)
    end = hermitian_path(cfg)[:, -1]
    assert np.mean(end[:, 0, 0].real ** 2) == pytest.approx(1.0, abs=0.05)
    assert np.mean(np.abs(end[:, 0, 1]) ** 2) == pytest.approx(1.0, abs=0.05)
    assert np.mean(end[:, 0, 1].real ** 2) == pytest.approx(0.5, abs=0.03)


def test_path_chunks_are_stable():
    a = hermitian_path(HermitianPathConfig(2, 0.5, 0.01, (1.0, 1.0), seed=4, replicas=1200))
    b = hermitian_path(HermitianPathConfig(2, 0.5, 0.01, (1.0, 1.0), seed=4, replicas=1000))
    assert np.array_equal(a[:1000], b)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**32))
def test_eigenvalues_match_charpoly(n, seed):
    H = hermitian_path(HermitianPathConfig(n, 0.05, 0.01, (1.0,) * n, seed=seed))[-1]
    assert np.max(np.abs(charpoly_eigenvalues(H) - np.linalg.eigvalsh(H))) < 1e-10


def test_charpoly_rejects_large_or_batched():
    with pytest.raises(MatrixError):
        charpoly_eigenvalues(np.eye(4))
    with pytest.raises(MatrixError):
        charpoly_eigenvalues(np.zeros((2, 2, 2)))


def test_top_eigenvalue_small_sizes():
    cfg = HermitianPathConfig(2, 0.2, 0.01, (0.7, 1.6), seed=5, replicas=30)
    H = hermitian_path(cfg)
    t = np.arange(H.shape[1]) * cfg.dt
    lam = np.linalg.eigvalsh(H - t[:, None, None] * np.diag(cfg.drift_diag))[..., -1]
    assert sup_lambda_max(cfg) == pytest.approx(np.maximum(lam.max(axis=1), 0.0), abs=1e-12)


def test_single_sup_is_exponential():
    a = 1.0
    s = sup_lambda_max(HermitianPathConfig(1, 30 / a, 1e-2, (a,), seed=6, replicas=10_000, scheme="bridge"))
    D, _ = ks_one_sample(s, lambda x: 1 - np.exp(-2 * a * x))
    assert D < 0.02


def test_sup_running_max_monotone_in_T():
    short = sup_lambda_max(HermitianPathConfig(2, 1.0, 0.01, (1.0, 1.0), seed=7, replicas=50))
    long = sup_lambda_max(HermitianPathConfig(2, 2.0, 0.01, (1.0, 1.0), seed=7, replicas=50))
    assert np.all(long >= short)


def test_brownian_scaling():
    # sup_[0,T] (B - a t) has the law of (1/a) sup_[0, a^2 T] (B - t)
    a, T, dt = 2.0, 5.0, 0.01
    s1 = sup_lambda_max(HermitianPathConfig(1, T, dt, (a,), seed=8, replicas=10_000))
    s2 = sup_lambda_max(HermitianPathConfig(1, a * a * T, a * a * dt, (1.0,), seed=9, replicas=10_000)) / a
    _, p = ks_two_sample(s1, s2)
    assert p > 0.01


def test_loe_single_is_chi_square_two():
    lam = sample_loe(1, seed=1, size=10_000)[:, 0]
    D, _ = ks_one_sample(lam, lambda x: 1 - np.exp(-x / 2))
    assert D < 0.02


def test_loe_eigenvalues_sorted_nonnegative():
    ev = sample_loe(4, seed=2, size=1000)
    assert np.all(ev > -1e-10)
    assert np.all(np.diff(ev, axis=-1) >= 0)
    with pytest.raises(MatrixError):
        sample_loe(0)


def test_loe_top_matches_lpp():
    N = 100_000
    loe = sample_loe(3, seed=3, size=N)[:, -1]
    g = 4 * flat_lpp_field(gen_environment((1.0, 1.0, 1.0), seed=4, size=N)).at(1, 1)
    D, _ = ks_two_sample(loe, g)
    assert D < 0.025


def test_sym_lue_precisions():
    g = sym_lue_precisions((0.7, 1.6))
    assert g == pytest.approx(np.array([[0.7, 2.3], [2.3, 1.6]]))


def test_sym_lue_single_is_exponential():
    a = 1.7
    lam = sample_sym_lue((a,), seed=1, size=10_000)[:, 0]
    D, _ = ks_one_sample(lam, lambda x: 1 - np.exp(-a * x))
    assert D < 0.02
    with pytest.raises(MatrixError):
        sample_sym_lue((1.0, -1.0))


def test_sym_lue_pair_density():
    alpha = (0.7, 1.6)
    ev = sample_sym_lue(alpha, seed=2, size=100_000)
    _, p = chi2_ordered_pairs(ev, lambda pts: det.eval_exp_det_density_batch(alpha, pts), nu=8, nv=5)
    assert p > 0.01


def test_sym_lue_top_matches_lpp():
    alpha = (0.7, 1.0, 1.6)
    xm = sample_sym_lue(alpha, seed=3, size=10_000)[:, -1]
    g = 2 * flat_lpp_field(gen_environment(alpha, seed=5, size=100_000)).at(1, 1)
    D, _ = ks_two_sample(xm, g)
    assert D < 0.025
