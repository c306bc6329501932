import itertools
import math
from fractions import Fraction as Fr

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate

from flatlpp import determinantal as det
from flatlpp.expfun import ExpPoly


def test_drift_spec_validation():
    with pytest.raises(det.DeterminantalError):
        det.DriftSpec([])
    with pytest.raises(det.DeterminantalError):
        det.DriftSpec([1.0, -0.5])
    assert det.DriftSpec([1, 1, 1]).regime == "equal"
    assert det.DriftSpec([0.7, 1.6]).regime == "distinct"
    assert det.DriftSpec([1.0, 1.0 + 1e-12]).regime == "general"


def test_ordered_vector_validation():
    det.as_ordered([0.0, 0.5, 0.5])
    with pytest.raises(det.DeterminantalError):
        det.as_ordered([0.5, 0.2])
    with pytest.raises(det.DeterminantalError):
        det.as_ordered([-0.1, 0.2])


def test_f_equal_first_terms():
    assert det.build_f_equal(0) == ExpPoly.exp(-2, 2)
    assert det.build_f_equal(1) == ExpPoly([(1, 0, 0), (-1, 0, -2), (-2, 1, -2)])
    with pytest.raises(det.DeterminantalError):
        det.build_f_equal(-1)


@pytest.mark.parametrize("i", range(1, 7))
def test_f_equal_ode_residual(i):
    f, prev = det.build_f_equal(i), det.build_f_equal(i - 1)
    assert (f.derivative().derivative().scale(Fr(1, 2)) + f.derivative() - prev).is_zero()


def test_pi_bar_values():
    assert det.eval_pi_bar(1, [0.5]) == pytest.approx(2 * math.exp(-1), rel=1e-15)
    assert det.eval_pi_bar(2, [0.3, 1.2]) > 0


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_pi_bar_normalization_exact(n):
    assert det.pi_bar_normalization(n) == 1


def test_pi_distinct_values():
    assert det.eval_pi((1.5,), [0.2]) == pytest.approx(3 * math.exp(-0.6), rel=1e-14)
    with pytest.raises(det.ConditioningError):
        det.eval_pi_distinct((1.0, 1.0 + 1e-12), [0.1, 0.2])


@pytest.mark.parametrize("rates", [(0.7, 1.6), (Fr(1, 2), Fr(3, 2), 2), (Fr(3, 10), 1, Fr(7, 5), Fr(21, 10))])
def test_pi_distinct_normalization_exact(rates):
    assert det.pi_distinct_normalization(rates) == pytest.approx(1, abs=1e-12)


def test_pi_continuity_in_drifts():
    pt = [0.4, 1.1]
    eps = 1e-3
    assert det.eval_pi((1 + eps, 1 - eps), pt) == pytest.approx(det.eval_pi_bar(2, pt), rel=1e-2)


@settings(max_examples=20, deadline=None)
@given(st.permutations(range(3)))
def test_pi_row_relabelling(perm):
    # permuting the row functions f_i together with the labels of the
    # Vandermonde factor leaves the density unchanged
    rates = (0.6, 1.1, 1.9)
    x = [0.2, 0.7, 1.5]

    def value(order):
        rows = []
        for i in order:
            f = ExpPoly([(1, 0, rates[i]), (-1, 0, -rates[i])])
            row = []
            for j in range(3):
                f = f.D(rates[j])
                row.append(f(x[j]))
            rows.append(row)
        vdm = np.prod([rates[order[b]] - rates[order[a]] for a, b in itertools.combinations(range(3), 2)])
        return math.exp(-np.dot(rates, x)) * np.linalg.det(rows) / vdm

    assert value(perm) == pytest.approx(det.eval_pi(rates, x), rel=1e-10)


def test_pi_positive_in_interior():
    rng = np.random.default_rng(11)
    pts = np.sort(rng.uniform(0, 3, size=(200, 3)), axis=1)
    assert np.all(det.eval_pi((0.7, 1.0, 1.6), pts) > 0)
    assert np.all(det.eval_pi_bar(3, pts) > 0)


def test_pi_batch_matches_scalar():
    pts = np.array([[0.1, 0.4], [0.5, 2.0]])
    batch = det.eval_pi((0.7, 1.6), pts)
    assert batch == pytest.approx([det.eval_pi((0.7, 1.6), p) for p in pts], rel=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 2.5), st.floats(0.05, 3.0), st.floats(0.0, 3.0), st.floats(0.0, 3.0))
def test_r_t_single_particle_oracles(a, t, x, y):
    r = det.eval_r_t((a,), t, [x], [y])
    assert r == pytest.approx(det.reflected_density_closed(a, t, x, y), rel=1e-10, abs=1e-12)
    assert r == pytest.approx(det.reflected_density_oracle(a, t, x, y), rel=1e-8, abs=1e-12)


@pytest.mark.parametrize("a,t,x", [(0.5, 0.3, 0.0), (1.0, 1.0, 0.7), (2.0, 2.5, 1.5)])
def test_r_t_conserves_mass(a, t, x):
    mass = integrate.quad(lambda y: det.eval_r_t((a,), t, [x], [y]), 0, math.inf, epsabs=1e-13)[0]
    assert mass == pytest.approx(1.0, abs=1e-9)


def test_r_t_two_particles_mass():
    drifts, t, x = (0.8, 1.3), 0.7, np.array([0.2, 0.9])
    mass = det.quad_w2plus(lambda p: det.eval_r_t(drifts, t, np.broadcast_to(x, p.shape), p))
    assert mass == pytest.approx(1.0, abs=1e-8)


def test_chapman_kolmogorov_equal_drifts():
    al, s, t = (1.0, 1.0), 0.4, 0.6
    rng = np.random.default_rng(5)
    for _ in range(3):
        x = np.sort(rng.uniform(0, 1.5, 2))
        y = np.sort(rng.uniform(0, 1.5, 2))
        conv = det.quad_w2plus(lambda p: det.eval_r_t(al, s, np.broadcast_to(x, p.shape), p)
                               * det.eval_r_t(al, t, p, np.broadcast_to(y, p.shape)))
        assert conv == pytest.approx(det.eval_r_t(al, s + t, x, y), abs=1e-6)


@pytest.mark.parametrize("drifts", [(0.7, 1.6), (1.0, 1.0)])
def test_stationarity(drifts):
    for y in ([0.3, 0.8], [0.0, 1.7], [1.2, 1.25]):
        assert det.stationarity_residual(drifts, 0.5, y) < 1e-5


def test_r_t_rejects_bad_time():
    with pytest.raises(det.DeterminantalError):
        det.eval_r_t((1.0,), 0.0, [0.1], [0.2])


def test_q_single_particle():
    ys = [0.2, 1.0, 2.5]
    for y in ys:
        assert det.eval_Q_m((2.0,), 1, [0.0], [y]) == pytest.approx(2 * math.exp(-2 * y), rel=1e-14)
        assert det.eval_Q_m((2.0,), 2, [0.0], [y]) == pytest.approx(4 * y * math.exp(-2 * y), rel=1e-14)
    with pytest.raises(det.DeterminantalError):
        det.eval_Q_m((2.0,), 0, [0.0], [1.0])


def test_onestep_product_examples():
    assert det.eval_onestep_product((1, 1), (0, 0), (1, 2)) == pytest.approx(math.exp(-2), rel=1e-15)
    assert det.eval_onestep_product((1, 1), (0, 0), (1, 0.5)) == 0.0
    assert det.eval_onestep_product((1, 1), (0.5, 0.6), (0.3, 2.0)) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.3, 2.5), min_size=1, max_size=3), st.data())
def test_q1_equals_product(rates, data):
    n = len(rates)
    x = sorted(data.draw(st.lists(st.floats(0, 2), min_size=n, max_size=n)))
    y = sorted(data.draw(st.lists(st.floats(0, 4), min_size=n, max_size=n)))
    # the two forms may differ on the measure-zero chamber boundaries
    base = np.maximum(x, np.r_[-np.inf, y[:-1]])
    assume(np.all(np.abs(np.array(y) - base) > 1e-9))
    assert det.eval_Q_m(rates, 1, x, y) == pytest.approx(det.eval_onestep_product(rates, x, y), abs=1e-10)


@pytest.mark.parametrize("rates,x,y", [((0.7, 1.6), (0.0, 0.3), (0.9, 1.4)), ((2.0, 2.0), (0.1, 0.1), (0.8, 2.0)),
                                       ((1.3, 0.5), (0.2, 0.6), (1.5, 1.6))])
def test_chain_convolution(rates, x, y):
    conv, q2 = det.chain_convolution_check(rates, x, y)
    assert conv == pytest.approx(q2, abs=1e-9)


def _flat_cdf_two(a1, a2, x):
    """P(e11 + max(e12, e21) <= x) by quadrature over e11."""
    r = a1 + a2

    def fmax(v):
        return (1 - math.exp(-2 * a1 * v)) * (1 - math.exp(-2 * a2 * v))

    return integrate.quad(lambda u: r * math.exp(-r * u) * fmax(x - u), 0, x, epsabs=1e-14)[0]


def test_cdf_top_examples():
    xs = np.linspace(0, 4, 9)
    assert det.eval_cdf_top((1.0,), xs) == pytest.approx(1 - np.exp(-2 * xs), abs=1e-14)
    for x in (0.3, 1.0, 2.5):
        assert det.eval_cdf_top((0.7, 1.6), x) == pytest.approx(_flat_cdf_two(0.7, 1.6, x), abs=1e-12)
        assert det.eval_cdf_top((1.0, 1.0), x) == pytest.approx(_flat_cdf_two(1.0, 1.0, x), abs=1e-12)


@pytest.mark.parametrize("drifts", [(1.0,), (1.0, 1.0, 1.0), (0.7, 1.0, 1.6), (0.5, 0.9, 1.3, 2.0)])
def test_cdf_top_is_a_distribution_function(drifts):
    xs = np.linspace(0, 30, 200)
    F = det.eval_cdf_top(drifts, xs)
    assert F[0] == 0.0
    assert np.all(np.diff(F) >= -1e-12)
    assert F[-1] == pytest.approx(1.0, abs=1e-10)


def test_cdf_top_rejects_near_equal_and_negative():
    with pytest.raises(det.ConditioningError):
        det.eval_cdf_top((1.0, 1.0 + 1e-12), 1.0)
    with pytest.raises(det.DeterminantalError):
        det.eval_cdf_top((1.0,), -0.5)


def test_toda_single_particle():
    xs = np.array([0.1, 0.8, 3.0])
    assert det.eval_cdf_toda(1, xs) == pytest.approx(1 - np.exp(-2 * xs), rel=1e-14)
    assert det.toda_g(0) == ExpPoly.const(1)
    # g[1] without the sqrt(2/pi) factor is sinh
    assert det.toda_g(1) == ExpPoly([(Fr(1, 2), 0, 1), (Fr(-1, 2), 0, -1)])


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_toda_matches_wronskian(n):
    xs = np.linspace(0.05, 12, 200)
    assert np.max(np.abs(det.eval_cdf_toda(n, xs) - det.eval_cdf_top((1.0,) * n, xs))) < 1e-8


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_toda_equation(n):
    assert det.toda_residual_function(n).is_zero()
    xs = np.random.default_rng(n).uniform(0.1, 6, 20)
    assert np.max(np.abs(det.toda_residual(n, xs))) < 1e-8


def test_exp_det_density():
    for lam in (0.1, 1.0, 3.0):
        assert det.eval_exp_det_density((1.7,), [lam]) == pytest.approx(1.7 * math.exp(-1.7 * lam), rel=1e-14)
    assert det.exp_det_normalization((1, 2)) == 1
    assert det.exp_det_normalization((Fr(1, 2), 1, Fr(5, 2))) == 1
    with pytest.raises(det.ConditioningError):
        det.eval_exp_det_density((1.0, 1.0), [0.1, 0.2])


def test_exp_det_positive_and_symmetric():
    rng = np.random.default_rng(3)
    lam = np.sort(rng.uniform(0, 4, size=(100, 3)), axis=1)
    vals = det.eval_exp_det_density_batch((0.7, 1.0, 1.6), lam)
    assert np.all(vals > 0)
    for perm in itertools.permutations((0.7, 1.0, 1.6)):
        assert det.eval_exp_det_density_batch(perm, lam) == pytest.approx(vals, rel=1e-10)
    assert vals[0] == pytest.approx(det.eval_exp_det_density((0.7, 1.0, 1.6), lam[0]), rel=1e-14)


def test_andreief_examples():
    f = [ExpPoly.exp(-1), ExpPoly.exp(-2)]
    g = [ExpPoly.exp(-3), ExpPoly.exp(-4)]
    assert det.andreief_check(f, g) < 1e-10
    assert det.andreief_check(f[:1], g[:1]) == 0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_andreief_derivative_variant(n):
    f = [ExpPoly.exp(Fr(-(i + 1), 2)) for i in range(n)]
    g = [ExpPoly.exp(-(j + 2)) for j in range(n)]
    assert det.andreief_check(f, g, variant="derivative") < 1e-10


def test_andreief_inhomogeneous_variant():
    n = 3
    rates = (Fr(1, 2), Fr(3, 4), Fr(6, 5))
    # f_i(0) = 0 as the lemma requires
    f = [ExpPoly([(1, 0, -Fr(i + 1, 2)), (-1, 0, -(i + 2))]) for i in range(n)]
    g = [ExpPoly.exp(-(j + 3)) for j in range(n)]
    assert det.andreief_check(f, g, variant="inhomogeneous", rates=rates) < 1e-10
