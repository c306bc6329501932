"""Closed-form densities and distribution functions.

Everything here is built from :mod:`flatlpp.expfun`: invariant densities of
the reflected system with a wall, its transition density, the m-step kernels
of the pushing particle chain, the CDF of the top particle (Wronskian and
Toda forms) and the exponential-determinant eigenvalue density.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import mpmath as mp
import numpy as np

from .expfun import ExpPoly, GaussErfcFun, ge_kernel_entry, integrate_ordered


class DeterminantalError(Exception):
    """Invalid input to a determinantal formula."""


class ConditioningError(DeterminantalError):
    """Rates too close together for a distinct-rate formula."""


DISTINCT_GAP = 1e-9


@dataclass(frozen=True)
class DriftSpec:
    """Positive drift rates ``(alpha_1, ..., alpha_n)``."""

    rates: tuple

    def __init__(self, rates):
        rates = tuple(rates)
        if not rates:
            raise DeterminantalError("at least one rate is required")
        if any(not float(r) > 0 for r in rates):
            raise DeterminantalError(f"rates must be positive, got {rates}")
        object.__setattr__(self, "rates", rates)

    @property
    def n(self) -> int:
        return len(self.rates)

    @property
    def regime(self) -> str:
        r = [float(a) for a in self.rates]
        if all(a == r[0] for a in r):
            return "equal"
        gaps = [abs(a - b) for a, b in itertools.combinations(r, 2)]
        if min(gaps) > DISTINCT_GAP:
            return "distinct"
        return "general"

    def require_distinct(self):
        if self.n > 1 and self.regime != "distinct":
            raise ConditioningError(
                f"rates {self.rates} are not pairwise distinct (gap <= {DISTINCT_GAP}); "
                "use the equal-drift formula"
            )

    def reversed(self) -> "DriftSpec":
        return DriftSpec(self.rates[::-1])


def as_drifts(d) -> DriftSpec:
    return d if isinstance(d, DriftSpec) else DriftSpec(d)


def as_ordered(x, n: int | None = None) -> np.ndarray:
    """Validate a point of ``W_n^+ = {0 <= x_1 <= ... <= x_n}``."""
    v = np.asarray(x, dtype=float)
    if v.ndim != 1:
        raise DeterminantalError("an ordered vector must be one-dimensional")
    if n is not None and v.size != n:
        raise DeterminantalError(f"expected {n} coordinates, got {v.size}")
    if v.size and (v[0] < 0 or np.any(np.diff(v) < 0)):
        raise DeterminantalError(f"{list(v)} is not in W_n^+")
    return v


def _exact(r):
    """Exact rational copy of a float rate."""
    return r if isinstance(r, (int, Fraction)) else Fraction(r)


def _prod(values):
    out = 1
    for v in values:
        out = out * v
    return out


def _vandermonde(rates):
    """``prod_{i<j} (a_j - a_i)``: the sign that makes the distinct-rate
    densities integrate to +1."""
    return _prod(b - a for a, b in itertools.combinations(rates, 2))


def integrate_det_ordered(entries: Sequence[Sequence[ExpPoly]]):
    """Integral over ``W_n^+`` of ``det(entries[i][j](x_j))``."""
    n = len(entries)
    total = 0
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        total += sign * integrate_ordered([entries[perm[j]][j] for j in range(n)])
    return total


def _perm_sign(perm) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def _det_at(entries, points):
    """Numeric determinant of ``entries[i][j](points[..., j])``."""
    n = len(entries)
    points = np.asarray(points, float)
    m = np.empty(points.shape[:-1] + (n, n))
    for i in range(n):
        for j in range(n):
            m[..., i, j] = entries[i][j](points[..., j])
    out = np.linalg.det(m)
    return out if out.ndim else float(out)


def _points(x, n):
    """Validate a single ordered point; batches are passed through."""
    x = np.asarray(x, float)
    return as_ordered(x, n) if x.ndim == 1 else x


# ---------------------------------------------------------------------------
# invariant measures
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def build_f_equal(i: int) -> ExpPoly:
    """``f_0 = 2 e^{-2x}`` and ``f_{i+1}`` solving ``f''/2 + f' = f_i`` from 0."""
    if i < 0:
        raise DeterminantalError("index must be non-negative")
    if i == 0:
        return ExpPoly.exp(-2, 2)
    return build_f_equal(i - 1).solve_adjoint()


@lru_cache(maxsize=None)
def _pi_bar_entries(n: int):
    rows = []
    for i in range(n):
        row, f = [], build_f_equal(i)
        for _ in range(n):
            row.append(f)
            f = f.derivative()
        rows.append(row)
    return rows


def eval_pi_bar(n: int, x) -> float:
    """Invariant density of the equal-drift (rate 1) system at ``x``."""
    x = _points(x, n)
    return _det_at(_pi_bar_entries(n), x)


def pi_bar_normalization(n: int):
    """Exact ``int_{W_n^+} pi_bar`` (a Fraction)."""
    return integrate_det_ordered(_pi_bar_entries(n))


def _pi_distinct_rows(rates):
    n = len(rates)
    rows = []
    for i in range(n):
        f = ExpPoly([(1, 0, rates[i]), (-1, 0, -rates[i])])
        row = []
        for j in range(n):
            f = f.D(rates[j])
            row.append(f)
        rows.append(row)
    return rows


@lru_cache(maxsize=None)
def _pi_distinct_entries(rates: tuple):
    return _pi_distinct_rows(rates)


def eval_pi_distinct(drifts, x) -> float:
    """Invariant density for pairwise distinct drifts."""
    d = as_drifts(drifts)
    d.require_distinct()
    rates = tuple(float(r) for r in d.rates)
    x = _points(x, d.n)
    det = _det_at(_pi_distinct_entries(rates), x)
    out = np.exp(-x @ np.array(rates)) * det / _vandermonde(rates)
    return out if np.ndim(out) else float(out)


def pi_distinct_normalization(drifts):
    """Exact ``int_{W_n^+} pi`` computed with rational copies of the rates."""
    d = as_drifts(drifts)
    d.require_distinct()
    rates = [_exact(r) for r in d.rates]
    rows = _pi_distinct_rows(rates)
    # fold e^{-alpha_j x_j} into column j
    cols = [[rows[i][j].times_exp(-rates[j]) for j in range(d.n)] for i in range(d.n)]
    return integrate_det_ordered(cols) / _vandermonde(rates)


def eval_pi(drifts, x) -> float:
    """Invariant density, dispatching on the drift regime."""
    d = as_drifts(drifts)
    if d.regime == "equal":
        a = float(d.rates[0])
        x = _points(x, d.n)
        # scaling: rates alpha correspond to rate 1 after x -> alpha x
        return a**d.n * eval_pi_bar(d.n, a * x)
    return eval_pi_distinct(d, x)


# ---------------------------------------------------------------------------
# transition densities of the reflected system
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _r_t_entries(t: float, rates: tuple):
    n = len(rates)
    return [[ge_kernel_entry(t, rates[: i + 1], rates[: j + 1]) for j in range(n)] for i in range(n)]


def r_t_entries(t: float, drifts) -> list[list[GaussErfcFun]]:
    d = as_drifts(drifts)
    return _r_t_entries(float(t), tuple(float(r) for r in d.rates))


def eval_r_t(drifts, t: float, x, y):
    """Transition density of the wall system from ``x`` to ``y`` at time ``t``.

    ``x`` and ``y`` may carry leading batch dimensions (last axis = n); no
    ordering check is made in that case.
    """
    d = as_drifts(drifts)
    if t <= 0:
        raise DeterminantalError("t must be positive")
    rates = np.array([float(r) for r in d.rates])
    xa, ya = np.asarray(x, float), np.asarray(y, float)
    if xa.ndim == 1 and ya.ndim == 1:
        as_ordered(xa, d.n)
        as_ordered(ya, d.n)
    xa, ya = np.broadcast_arrays(xa, ya)
    ents = r_t_entries(t, d)
    n = d.n
    m = np.empty(xa.shape[:-1] + (n, n))
    for i in range(n):
        for j in range(n):
            m[..., i, j] = ents[i][j](xa[..., i], ya[..., j])
    pref = np.exp(-np.sum(rates * (ya - xa), axis=-1) - 0.5 * t * np.sum(rates**2))
    out = pref * np.linalg.det(m)
    return out if out.ndim else float(out)


def reflected_density_oracle(alpha: float, t: float, x: float, y: float) -> float:
    """Density of reflected BM with drift ``-alpha`` by a duality quadrature.

    ``P(Y_t <= y | Y_0 = x)`` equals the mass beyond level ``x`` of Brownian
    motion with drift ``alpha`` started at ``y`` and killed at 0.  The density
    is its y-derivative, differentiated under the integral sign and integrated
    adaptively.
    """
    from scipy import integrate

    c = 1.0 / math.sqrt(2 * math.pi * t)

    def integrand(v):
        base = alpha * (v - y) - 0.5 * alpha * alpha * t
        g1 = c * math.exp(base - (v - y) ** 2 / (2 * t))
        g2 = c * math.exp(base - (v + y) ** 2 / (2 * t))
        return -alpha * (g1 - g2) + g1 * (v - y) / t + g2 * (v + y) / t

    val, _ = integrate.quad(integrand, x, math.inf, epsabs=1e-15, epsrel=1e-13, limit=400)
    return val


def reflected_density_closed(alpha: float, t: float, x: float, y: float) -> float:
    """Closed-form density of reflected BM with drift ``-alpha`` on [0, inf)."""
    from scipy.special import log_ndtr

    mu = -alpha
    s = math.sqrt(t)

    def phi_t(z):
        return math.exp(-0.5 * z * z / t) / math.sqrt(2 * math.pi * t)

    tail = math.exp(2 * mu * y + log_ndtr(-(y + x + mu * t) / s))
    return phi_t(y - x - mu * t) + math.exp(2 * mu * y) * phi_t(y + x + mu * t) - 2 * mu * tail


# ---------------------------------------------------------------------------
# quadrature over the two-particle chamber
# ---------------------------------------------------------------------------

def w2plus_nodes(L: float = 14.0, nodes: int = 20, panels: int = 14):
    """Tensor Gauss-Legendre rule on ``{0 <= x1 <= x2}`` truncated at ``L``.

    Coordinates are ``(x1, x2 - x1)`` in ``[0, L]^2``; returns ``(points,
    weights)`` with points of shape ``(k, 2)``.
    """
    t, w = np.polynomial.legendre.leggauss(nodes)
    e = np.linspace(0.0, L, panels + 1)
    h = np.diff(e)[:, None]
    z = (e[:-1, None] + h * (t + 1) / 2).ravel()
    wz = (h / 2 * w).ravel()
    U, G = np.meshgrid(z, z, indexing="ij")
    pts = np.stack([U.ravel(), (U + G).ravel()], axis=-1)
    return pts, np.outer(wz, wz).ravel()


def quad_w2plus(fn, L: float = 14.0, nodes: int = 20, panels: int = 14) -> float:
    """``int_{W_2^+} fn`` for ``fn`` vectorised over points ``(..., 2)``."""
    pts, w = w2plus_nodes(L, nodes, panels)
    return float(np.dot(w, np.asarray(fn(pts), float)))


def stationarity_residual(drifts, t: float, y, **quad) -> float:
    """Relative error of ``int pi(x) r_t(x, y) dx = pi(y)`` for ``n = 2``."""
    d = as_drifts(drifts)
    if d.n != 2:
        raise DeterminantalError("quadrature is implemented for n = 2")
    y = as_ordered(y, 2)
    pts, w = w2plus_nodes(**quad)
    vals = eval_pi(d, pts) * eval_r_t(d, t, pts, np.broadcast_to(y, pts.shape))
    target = eval_pi(d, y)
    return float(abs(np.dot(w, vals) - target) / abs(target))


# ---------------------------------------------------------------------------
# particle chain kernels
# ---------------------------------------------------------------------------

def _base_f(m: int) -> ExpPoly:
    return ExpPoly.monomial(m - 1, Fraction(1, math.factorial(m - 1)), one_sided=True)


@lru_cache(maxsize=64)
def _q_entries(rates: tuple, m: int):
    n = len(rates)
    f = _base_f(m)
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            if j > i:
                g = f.chain("D", rates[i + 1 : j + 1])
            elif j < i:
                g = f.chain("I", rates[j + 1 : i + 1])
            else:
                g = f
            row.append(g)
        rows.append(row)
    return rows


def q_m_entries(rates, m: int, cancelled: bool = True):
    """Entries of the m-step kernel determinant.

    With ``cancelled=False`` the full ``D^{b_1..b_j} I^{b_1..b_i} f`` chains are
    returned; they coincide with the cancelled form on ``x > 0``.
    """
    rates = tuple(_exact(r) for r in rates)
    if cancelled:
        return _q_entries(rates, m)
    f = _base_f(m)
    n = len(rates)
    return [[f.chain("I", rates[: i + 1]).chain("D", rates[: j + 1]) for j in range(n)] for i in range(n)]


def eval_Q_m(rates, m: int, x, y) -> float:
    """m-step transition density of the pushing particle chain."""
    if m < 1:
        raise DeterminantalError("m must be a positive integer")
    rates = tuple(float(r) for r in rates)
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(rates)
    ents = q_m_entries(rates, m)
    mat = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            mat[i, j] = ents[i][j](y[j] - x[i])
    b = np.array(rates)
    pref = np.prod(b) ** m * math.exp(-float(np.sum(b * (y - x))))
    return float(pref * np.linalg.det(mat))


def eval_onestep_product(rates, x, y) -> float:
    """Explicit one-step density: each particle jumps past its lower neighbour."""
    out = 1.0
    prev = -math.inf
    for b, xj, yj in zip(rates, x, y):
        base = max(xj, prev)
        if not yj > base:
            return 0.0
        out *= b * math.exp(-b * (yj - base))
        prev = yj
    return out


def chain_convolution_check(rates, x, y) -> tuple[float, float]:
    """``(int Q_1(x, z) Q_1(z, y) dz, Q_2(x, y))`` for two particles.

    The integral is taken with the explicit one-step density and adaptive
    quadrature split at its kinks.
    """
    from scipy import integrate

    b1, b2 = (float(r) for r in rates)
    x1, x2 = (float(v) for v in x)
    y1, y2 = (float(v) for v in y)

    def inner(z1):
        lo = max(x2, z1)
        if lo >= y2:
            return 0.0
        f = lambda z2: eval_onestep_product((b1, b2), (x1, x2), (z1, z2)) * eval_onestep_product((b1, b2), (z1, z2), (y1, y2))
        pts = [p for p in (y1,) if lo < p < y2]
        return integrate.quad(f, lo, y2, points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=200)[0]

    if not y1 > x1:
        conv = 0.0
    else:
        pts = [p for p in (x2,) if x1 < p < y1]
        conv = integrate.quad(inner, x1, y1, points=pts or None, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return conv, eval_Q_m((b1, b2), 2, (x1, x2), (y1, y2))


# ---------------------------------------------------------------------------
# top-particle distribution function
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _cdf_equal_entries(n: int):
    rows = []
    for i in range(n):
        f = build_f_equal(i)
        prim = f.antiderivative()
        row = [prim - prim.value_at(0)]
        g = f
        for _ in range(1, n):
            row.append(g)
            g = g.derivative()
        rows.append(row)
    return rows


@lru_cache(maxsize=None)
def cdf_equal_function(n: int) -> ExpPoly:
    """``det(f_{i-1}^{(j-2)})`` as an exact exp-polynomial in ``x``."""
    return _symbolic_det(_cdf_equal_entries(n))


def _symbolic_det(entries) -> ExpPoly:
    """Laplace expansion along the first row, memoised over column subsets."""
    n = len(entries)
    memo: dict = {}

    def minor(row: int, cols: tuple):
        if row == n:
            return ExpPoly.const(1)
        if cols in memo:
            return memo[cols]
        total = ExpPoly.zero()
        for pos, c in enumerate(cols):
            sub = minor(row + 1, cols[:pos] + cols[pos + 1 :])
            term = entries[row][c] * sub
            total = total + (term if pos % 2 == 0 else -term)
        memo[cols] = total
        return total

    return minor(0, tuple(range(n)))


def _cdf_distinct_rows(rates):
    n = len(rates)
    rows = []
    for i in range(n):
        f = ExpPoly([(1, 0, rates[i]), (-1, 0, -rates[i])])
        row = [f]
        for j in range(1, n):
            f = f.D(rates[j - 1])
            row.append(f)
        rows.append(row)
    return rows


@lru_cache(maxsize=64)
def cdf_distinct_function(rates: tuple) -> ExpPoly:
    rates = tuple(_exact(r) for r in rates)
    det = _symbolic_det(_cdf_distinct_rows(rates))
    return det.times_exp(-sum(rates)).scale(1 / _vandermonde(rates))


def eval_cdf_top(drifts, x):
    """``P(G(1,1) <= x)`` for the flat LPP field (equivalently the top particle)."""
    d = as_drifts(drifts)
    xa = np.asarray(x, float)
    if np.any(xa < 0):
        raise DeterminantalError("x must be non-negative")
    if d.regime == "equal":
        a = float(d.rates[0])
        out = cdf_equal_function(d.n)(a * xa)
    elif d.regime == "distinct":
        out = cdf_distinct_function(tuple(d.rates))(xa)
    else:
        raise ConditioningError("near-equal rates: perturb or use equal drifts")
    # F(0) = 0 exactly; the determinant only cancels to rounding there
    out = np.where(xa == 0, 0.0, np.clip(out, 0.0, 1.0))
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# Toda form
# ---------------------------------------------------------------------------

_X = ExpPoly.monomial(1)
_SQRT_2_OVER_PI = mp.sqrt(2 / mp.pi)


def euler_op(f: ExpPoly) -> ExpPoly:
    """``(x d/dx) f``."""
    return _X * f.derivative()


@lru_cache(maxsize=None)
def toda_g(n: int) -> ExpPoly:
    """Wronskian ``det((x d/dx)^{i+j-2} sinh x)`` without the ``sqrt(2/pi)`` factors.

    The true ``g[n]`` equals ``(2/pi)^{n/2}`` times this function.
    """
    if n == 0:
        return ExpPoly.const(Fraction(1))
    sinh = ExpPoly([(Fraction(1, 2), 0, 1), (Fraction(-1, 2), 0, -1)])
    powers = [sinh]
    for _ in range(2 * n - 2):
        powers.append(euler_op(powers[-1]))
    entries = [[powers[i + j] for j in range(n)] for i in range(n)]
    return _symbolic_det(entries)


@lru_cache(maxsize=None)
def toda_normalization(n: int):
    """Exact ``Z`` such that ``F(x) -> 1``, returned as ``(fraction, power_of_2_over_pi)``.

    ``Z = fraction * (2/pi)^{n/2}``.  Raises if the leading exponential term
    grows faster than ``x^{n(n-1)/2}``.
    """
    g = toda_g(n)
    top = n * (n - 1) // 2
    lead = [t for t in g.terms if t.rate == n]
    if any(t.power > top for t in lead):
        raise DeterminantalError("unexpected growth in the Toda tau-function")
    coeff = sum((t.coeff for t in lead if t.power == top), Fraction(0))
    if coeff == 0:
        raise DeterminantalError("vanishing leading coefficient")
    return coeff


def eval_cdf_toda(n: int, x, normalized: bool = True):
    """Top-particle CDF (equal drifts 1) from the Toda tau-function."""
    xs = np.atleast_1d(np.asarray(x, float))
    if np.any(xs <= 0):
        raise DeterminantalError("x must be positive")
    g = toda_g(n)
    z = toda_normalization(n) if normalized else Fraction(1)
    terms = g.terms
    out = np.empty(xs.shape)
    for idx, xv in enumerate(xs):
        # F is of order x^{n^2} near 0; guard the cancellation with extra digits
        dps = 30 + int(n * n * max(0.0, -math.log10(xv))) + 5 * n
        with mp.workdps(dps):
            xm = mp.mpf(xv)
            tot = mp.mpf(0)
            for c, k, r in terms:
                tot += mp.mpf(c.numerator) / c.denominator * xm**k * mp.exp((int(r) - n) * xm)
            val = tot * xm ** (-(n * (n - 1)) // 2) / (mp.mpf(z.numerator) / z.denominator)
            out[idx] = float(val)
    return out if np.ndim(x) else float(out[0])


def toda_plateau(n: int) -> float:
    """Deviation of the normalised Toda CDF from 1 at ``x = 40/n``."""
    return abs(eval_cdf_toda(n, 40.0 / n) - 1.0)


def toda_residual_function(n: int) -> ExpPoly:
    """``theta^2 g * g - (theta g)^2 - g[n+1] g[n-1]`` with ``theta = x d/dx``.

    Identically zero when the Toda equation holds (scale factors cancel).
    """
    g = toda_g(n)
    tg = euler_op(g)
    ttg = euler_op(tg)
    return ttg * g - tg * tg - toda_g(n + 1) * toda_g(n - 1)


def toda_residual(n: int, x) -> np.ndarray:
    """Pointwise ``(x d/dx)^2 log g[n] - g[n+1] g[n-1]/g[n]^2``.

    Evaluated in high precision from the exact exp-polynomials.
    """
    g = toda_g(n)
    tg = euler_op(g)
    ttg = euler_op(tg)
    gp, gm = toda_g(n + 1), toda_g(n - 1)
    out = []
    for xv in np.atleast_1d(x):
        with mp.workdps(60):
            G, TG, TTG = g.eval_mp(xv, 60), tg.eval_mp(xv, 60), ttg.eval_mp(xv, 60)
            lhs = (TTG * G - TG * TG) / (G * G)
            rhs = gp.eval_mp(xv, 60) * gm.eval_mp(xv, 60) / (G * G)
            out.append(float(lhs - rhs))
    return np.array(out)


# ---------------------------------------------------------------------------
# exponential determinant (eigenvalue / RSK) density
# ---------------------------------------------------------------------------

def exp_det_constant(rates) -> float:
    pairs = list(itertools.combinations(rates, 2))
    return _prod(rates) * _prod(a + b for a, b in pairs) / _prod(a - b for a, b in pairs)


def eval_exp_det_density(drifts, lam) -> float:
    """``prod a * prod (a_i+a_j) / prod (a_i-a_j) * det(exp(-a_i lam_j))``."""
    d = as_drifts(drifts)
    d.require_distinct()
    rates = np.array([float(r) for r in d.rates])
    lam = np.asarray(lam, float)
    mat = np.exp(-np.outer(rates, lam))
    return float(exp_det_constant(list(rates)) * np.linalg.det(mat))


def eval_exp_det_density_batch(drifts, lam: np.ndarray) -> np.ndarray:
    """Vectorised :func:`eval_exp_det_density` over points of shape ``(..., n)``."""
    d = as_drifts(drifts)
    d.require_distinct()
    rates = np.array([float(r) for r in d.rates])
    lam = np.asarray(lam, float)
    mat = np.exp(-rates[:, None] * lam[..., None, :])
    return exp_det_constant(list(rates)) * np.linalg.det(mat)


def exp_det_normalization(drifts):
    d = as_drifts(drifts)
    d.require_distinct()
    rates = [_exact(r) for r in d.rates]
    entries = [[ExpPoly.exp(-a) for _ in rates] for a in rates]
    return exp_det_constant(rates) * integrate_det_ordered(entries)


# ---------------------------------------------------------------------------
# Andreief identity and its operator generalisations
# ---------------------------------------------------------------------------

def _neg_derivative(g: ExpPoly, k: int) -> ExpPoly:
    """``g^{(-k)}(x) = int_x^inf (u-x)^{k-1}/(k-1)! g(u) du``; ``k = 0`` gives g.

    This is the k-fold iterated tail integral.  With the kernel
    ``(x-u)^{k-1}`` instead, the derivative form of the Andreief identity
    picks up the sign ``(-1)^{(n-1)(n-2)/2}``.
    """
    if k == 0:
        return g
    out = ExpPoly.zero()
    for m in range(k):
        # (u-x)^{k-1} = sum_m C(k-1, m) u^m (-x)^{k-1-m}
        moment = (ExpPoly.monomial(m) * g).J(0)
        c = Fraction(math.comb(k - 1, m) * (-1) ** (k - 1 - m), math.factorial(k - 1))
        out = out + ExpPoly.monomial(k - 1 - m) * moment.scale(c)
    return out


def andreief_check(f: Sequence[ExpPoly], g: Sequence[ExpPoly], n: int | None = None,
                   variant: str = "plain", rates=None) -> float:
    """Discrepancy between the two sides of the Andreief identity.

    ``variant`` selects the left-hand side: ``"plain"`` uses
    ``det(f_i(x_j)) det(g_j(x_i))``; ``"derivative"`` uses ``f_i^{(j-1)}`` and
    ``g_j^{(-i+1)}``; ``"inhomogeneous"`` uses ``D^{a_1..a_j} f_i`` and
    ``J^{-a_1..-a_i} g_j`` (requires ``f_i(0) = 0``).
    """
    n = len(f) if n is None else n
    f, g = list(f)[:n], list(g)[:n]
    if len(f) != n or len(g) != n:
        raise DeterminantalError("need n functions in each family")
    if variant == "plain":
        A = [[f[i] for _ in range(n)] for i in range(n)]
        B = [[g[j] for j in range(n)] for _ in range(n)]
    elif variant == "derivative":
        A = []
        for i in range(n):
            row, h = [], f[i]
            for _ in range(n):
                row.append(h)
                h = h.derivative()
            A.append(row)
        B = [[_neg_derivative(g[j], i) for j in range(n)] for i in range(n)]
    elif variant == "inhomogeneous":
        if rates is None or len(rates) < n:
            raise DeterminantalError("the inhomogeneous variant needs n rates")
        for h in f:
            if abs(h.value_at(0)) > 1e-14:
                raise DeterminantalError("inhomogeneous variant requires f_i(0) = 0")
        A = [[f[i].chain("D", rates[: j + 1]) for j in range(n)] for i in range(n)]
        B = [[g[j].chain("J", [-a for a in rates[: i + 1]]) for j in range(n)] for i in range(n)]
    else:
        raise DeterminantalError(f"unknown variant {variant!r}")
    # A[i][j] is a function of x_j; B[i][j] is a function of x_i
    lhs = 0
    for sigma in itertools.permutations(range(n)):
        ss = _perm_sign(sigma)
        for tau in itertools.permutations(range(n)):
            st = _perm_sign(tau)
            factors = [A[sigma[k]][k] * B[k][tau[k]] for k in range(n)]
            lhs += ss * st * integrate_ordered(factors)
    gram = np.array([[float((f[i] * g[j]).integrate(0)) for j in range(n)] for i in range(n)])
    rhs = float(np.linalg.det(gram))
    return abs(float(lhs) - rhs)
