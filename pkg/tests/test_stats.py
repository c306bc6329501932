import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatlpp.rng import substream
from flatlpp.stats import (SampleBatch, ValidationError, bootstrap_ci, chi2_density_fit, chi2_from_probs, ecdf,
                           energy_distance, finite_diff_grad, ks_one_sample, ks_two_sample)


def _exp(rate, size, *key):
    return substream(0, "test-stats", *key).exponential(1 / rate, size)


def test_sample_batch_validation():
    b = SampleBatch([1.0, 2.0, 3.0], label="x")
    assert (b.n, b.d) == (3, 1)
    with pytest.raises(ValidationError):
        SampleBatch([1.0])
    with pytest.raises(ValidationError):
        SampleBatch([1.0, np.nan])
    with pytest.raises(ValidationError):
        SampleBatch(np.zeros((2, 2, 2)))


def test_ecdf():
    x, F = ecdf([3.0, 1.0, 2.0])
    assert list(x) == [1.0, 2.0, 3.0]
    assert F == pytest.approx([1 / 3, 2 / 3, 1.0])


def test_ks_identical_batches():
    a = _exp(1.0, 500, "same")
    D, p = ks_two_sample(a, a.copy())
    assert D == 0.0 and p == 1.0


def test_ks_detects_different_rates():
    _, p = ks_two_sample(_exp(1.0, 10_000, "a"), _exp(2.0, 10_000, "b"))
    assert p < 1e-6


def test_ks_null_calibration():
    ok = sum(ks_two_sample(_exp(1.0, 10_000, "null", s, 0), _exp(1.0, 10_000, "null", s, 1))[1] > 0.01
             for s in range(100))
    assert ok >= 98


def test_ks_needs_fifty_points_and_finite_values():
    with pytest.raises(ValidationError):
        ks_two_sample(np.ones(10), np.ones(100))
    with pytest.raises(ValidationError):
        ks_two_sample(np.r_[np.ones(99), np.inf], np.ones(100))


@settings(max_examples=30, deadline=None)
@given(st.integers(50, 300), st.integers(50, 300), st.integers(0, 2**32))
def test_ks_distance_in_unit_interval(na, nb, seed):
    g = substream(seed, "ks-range")
    D, p = ks_two_sample(g.normal(size=na), g.normal(0.3, size=nb))
    assert 0 <= D <= 1 and 0 <= p <= 1


def test_ks_one_sample():
    x = _exp(2.0, 10_000, "one")
    _, p = ks_one_sample(x, lambda t: 1 - np.exp(-2 * t))
    assert p > 0.01
    _, p = ks_one_sample(x, lambda t: 1 - np.exp(-t))
    assert p < 1e-6


def test_ks_one_sample_rejects_bad_cdf():
    x = _exp(2.0, 100, "bad")
    with pytest.raises(ValidationError):
        ks_one_sample(x, lambda t: np.exp(-t))
    with pytest.raises(ValidationError):
        ks_one_sample(x, lambda t: 2 * (1 - np.exp(-t)))


def test_energy_detects_shift():
    g = substream(0, "energy-shift")
    a = g.normal(size=(2000, 2))
    b = g.normal(size=(2000, 2)) + np.array([1.0, 0.0])
    # 1999 permutations: the smallest attainable p-value is 1/2000
    stat, p = energy_distance(a, b, permutations=1999)
    assert stat > 0
    assert p < 1e-3


def test_energy_shuffled_null():
    g = substream(0, "energy-null")
    x = g.normal(size=(600, 2))
    perm = g.permutation(600)
    _, p = energy_distance(x[perm[:300]], x[perm[300:]], permutations=199)
    assert 0 < p <= 1
    assert p > 0.01


def test_energy_invariant_under_shared_isometry():
    g = substream(0, "energy-iso")
    a = g.normal(size=(300, 2))
    b = g.normal(size=(300, 2)) + 0.3
    th = 0.7
    R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    shift = np.array([5.0, -2.0])
    s1, p1 = energy_distance(a, b, permutations=199, seed=3)
    s2, p2 = energy_distance(a @ R.T + shift, b @ R.T + shift, permutations=199, seed=3)
    assert s2 == pytest.approx(s1, rel=1e-4)
    assert (p1 < 0.05) == (p2 < 0.05)


def test_energy_validation():
    with pytest.raises(ValidationError):
        energy_distance(np.zeros((10, 2)), np.zeros((10, 3)))
    with pytest.raises(ValidationError):
        energy_distance(np.zeros((10, 2)), np.zeros((10, 2)), permutations=0)


def test_energy_deterministic_given_seed():
    g = substream(0, "energy-det")
    a, b = g.normal(size=(100, 3)), g.normal(size=(120, 3))
    assert energy_distance(a, b, seed=5) == energy_distance(a, b, seed=5)


def test_chi2_density_fit():
    x = _exp(2.0, 20_000, "chi2")
    _, p = chi2_density_fit(x, lambda t: 2 * np.exp(-2 * t), support=(0, np.inf))
    assert p > 0.01
    _, p = chi2_density_fit(x, lambda t: np.exp(-t), support=(0, np.inf))
    assert p < 1e-6
    with pytest.raises(ValidationError):
        chi2_density_fit(x, lambda t: 2 * np.exp(-2 * t), bins=4)


def test_chi2_from_probs():
    stat, p = chi2_from_probs([25, 25, 25, 25], [0.25] * 4)
    assert stat == 0.0 and p == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        chi2_from_probs([1, 2], [1.0, 0.0])


def test_finite_diff_grad():
    x = np.array([0.3, -1.2, 2.0])
    assert finite_diff_grad(lambda z: 0.5 * np.dot(z, z), x) == pytest.approx(x, abs=1e-8)
    assert finite_diff_grad(lambda z: np.exp(-z[0]), np.zeros(1))[0] == pytest.approx(-1.0, abs=1e-6)
    with pytest.raises(ValidationError):
        finite_diff_grad(lambda z: z[0], np.zeros(1), h=0.0)


def test_bootstrap_interval_covers_mean():
    x = _exp(1.0, 5000, "boot")
    lo, hi = bootstrap_ci(x, n_boot=500)
    assert lo < x.mean() < hi
    assert lo < 1.0 < hi
    assert bootstrap_ci(x, n_boot=200, seed=1) == bootstrap_ci(x, n_boot=200, seed=1)
