"""Exact arithmetic for exponential polynomials and Gaussian-tail functions.

Two closed function classes are provided:

``ExpPoly``
    finite sums ``c * x**k * exp(rate * x)``, either on the whole line or
    one-sided (identically zero for ``x <= 0``).  Coefficients and rates may be
    floats or :class:`fractions.Fraction` instances; with fractions every
    operation is exact.

``GaussErfcFun``
    finite sums of ``P(x, y) * exp(a*x + b*y) * K(cx*x + cy*y + d)`` where ``P``
    is a bivariate polynomial and ``K`` is the standard normal density, its
    upper tail ``Q`` or the constant 1.  The class is closed under partial
    derivatives and under the tail-integral operator ``J``.
"""
from __future__ import annotations

import math
from fractions import Fraction
from math import comb, factorial
from typing import Iterable, NamedTuple

import numpy as np
from scipy import special

COEFF_TOL = 1e-14
RATE_TOL = 1e-12


class ExpFunError(Exception):
    """Base error for the function algebra."""


class DivergenceError(ExpFunError):
    """An improper integral does not converge."""


class SupportError(ExpFunError):
    """Operation not defined for the function's support."""


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction))


def _negligible(c) -> bool:
    if _is_exact(c):
        return c == 0
    return abs(c) < COEFF_TOL


def _same_rate(r, s) -> bool:
    if _is_exact(r) and _is_exact(s):
        return r == s
    return abs(r - s) <= RATE_TOL


def _is_zero_rate(r) -> bool:
    return _same_rate(r, 0)


class ExpPolyTerm(NamedTuple):
    coeff: float
    power: int
    rate: float


class ExpPoly:
    """Finite sum of ``coeff * x**power * exp(rate * x)``.

    Instances are immutable.  ``one_sided=True`` means the function vanishes
    for ``x <= 0``; operators act on the smooth extension and re-truncate, so
    no delta masses ever appear.
    """

    __slots__ = ("_terms", "one_sided")

    def __init__(self, terms: Iterable = (), one_sided: bool = False):
        table: dict = {}
        for t in terms:
            coeff, power, rate = t
            if power < 0 or int(power) != power:
                raise ValueError(f"power must be a non-negative integer, got {power}")
            _accumulate(table, rate, int(power), coeff)
        self._terms = _prune(table)
        self.one_sided = bool(one_sided)

    # -- construction helpers -------------------------------------------
    @classmethod
    def exp(cls, rate, coeff=1, one_sided=False) -> "ExpPoly":
        return cls([(coeff, 0, rate)], one_sided)

    @classmethod
    def monomial(cls, power: int, coeff=1, rate=0, one_sided=False) -> "ExpPoly":
        return cls([(coeff, power, rate)], one_sided)

    @classmethod
    def const(cls, c, one_sided=False) -> "ExpPoly":
        return cls([(c, 0, 0)], one_sided)

    @classmethod
    def zero(cls, one_sided=False) -> "ExpPoly":
        return cls((), one_sided)

    @classmethod
    def _from_table(cls, table, one_sided) -> "ExpPoly":
        obj = cls.__new__(cls)
        obj._terms = _prune(table)
        obj.one_sided = one_sided
        return obj

    # -- inspection -------------------------------------------------------
    @property
    def terms(self) -> list[ExpPolyTerm]:
        out = []
        for rate in sorted(self._terms, key=float):
            for k in sorted(self._terms[rate]):
                out.append(ExpPolyTerm(self._terms[rate][k], k, rate))
        return out

    @property
    def rates(self) -> list:
        return sorted(self._terms, key=float)

    def is_zero(self) -> bool:
        return not self._terms

    def __len__(self) -> int:
        return sum(len(p) for p in self._terms.values())

    def __repr__(self) -> str:
        if not self._terms:
            body = "0"
        else:
            parts = []
            for c, k, r in self.terms:
                s = f"{c}"
                if k:
                    s += f"*x^{k}" if k > 1 else "*x"
                if not _is_zero_rate(r):
                    s += f"*exp({r}*x)"
                parts.append(s)
            body = " + ".join(parts)
        tag = ", one_sided" if self.one_sided else ""
        return f"ExpPoly({body}{tag})"

    # -- evaluation -------------------------------------------------------
    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.zeros_like(xa)
        for rate, poly in self._terms.items():
            p = np.zeros_like(xa)
            kmax = max(poly)
            for k in range(kmax, -1, -1):
                p = p * xa + float(poly.get(k, 0))
            out = out + p * np.exp(float(rate) * xa)
        if self.one_sided:
            out = np.where(xa > 0, out, 0.0)
        return out if out.ndim else float(out)

    def eval_mp(self, x, dps: int = 50):
        """High-precision evaluation with mpmath (exact coefficients kept)."""
        import mpmath as mp

        with mp.workdps(dps):
            xm = mp.mpf(x) if not isinstance(x, Fraction) else mp.mpf(x.numerator) / x.denominator
            if self.one_sided and xm <= 0:
                return mp.mpf(0)
            total = mp.mpf(0)
            for c, k, r in self.terms:
                total += _mp(c) * xm**k * mp.exp(_mp(r) * xm)
            return +total

    # -- algebra ----------------------------------------------------------
    def _check_support(self, other: "ExpPoly") -> bool:
        if self.is_zero():
            return other.one_sided
        if other.is_zero():
            return self.one_sided
        if self.one_sided != other.one_sided:
            raise SupportError("cannot add whole-line and one-sided functions")
        return self.one_sided

    def __add__(self, other):
        if not isinstance(other, ExpPoly):
            other = ExpPoly.const(other, self.one_sided)
        side = self._check_support(other)
        table = _copy_table(self._terms)
        for rate, poly in other._terms.items():
            for k, c in poly.items():
                _accumulate(table, rate, k, c)
        return ExpPoly._from_table(table, side)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1)

    def __sub__(self, other):
        if not isinstance(other, ExpPoly):
            other = ExpPoly.const(other, self.one_sided)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, s) -> "ExpPoly":
        table = {r: {k: c * s for k, c in p.items()} for r, p in self._terms.items()}
        return ExpPoly._from_table(table, self.one_sided)

    def __mul__(self, other):
        if not isinstance(other, ExpPoly):
            return self.scale(other)
        table: dict = {}
        for r1, p1 in self._terms.items():
            for r2, p2 in other._terms.items():
                for k1, c1 in p1.items():
                    for k2, c2 in p2.items():
                        _accumulate(table, r1 + r2, k1 + k2, c1 * c2)
        return ExpPoly._from_table(table, self.one_sided or other.one_sided)

    __rmul__ = __mul__

    def times_exp(self, rate) -> "ExpPoly":
        """Multiply by ``exp(rate * x)``."""
        table: dict = {}
        for r, p in self._terms.items():
            for k, c in p.items():
                _accumulate(table, r + rate, k, c)
        return ExpPoly._from_table(table, self.one_sided)

    def as_one_sided(self) -> "ExpPoly":
        return ExpPoly._from_table(_copy_table(self._terms), True)

    def as_whole_line(self) -> "ExpPoly":
        return ExpPoly._from_table(_copy_table(self._terms), False)

    def shift(self, s) -> "ExpPoly":
        """Return the function ``x -> f(x + s)`` (whole-line only)."""
        if self.one_sided:
            raise SupportError("shift is only defined for whole-line functions")
        table: dict = {}
        for r, p in self._terms.items():
            er = _exp_of(r * s)
            for k, c in p.items():
                for m in range(k + 1):
                    _accumulate(table, r, m, c * comb(k, m) * s ** (k - m) * er)
        return ExpPoly._from_table(table, False)

    def allclose(self, other: "ExpPoly", tol: float = 1e-12) -> bool:
        """Canonical-form comparison with absolute tolerance on coefficients."""
        diff = _copy_table(self._terms)
        for rate, poly in other._terms.items():
            for k, c in poly.items():
                _accumulate(diff, rate, k, -c)
        return all(abs(c) <= tol for p in diff.values() for c in p.values())

    def __eq__(self, other):
        if not isinstance(other, ExpPoly):
            return NotImplemented
        if self.one_sided != other.one_sided and not (self.is_zero() and other.is_zero()):
            return False
        return self.allclose(other, 0.0)

    __hash__ = None

    # -- calculus ---------------------------------------------------------
    def derivative(self) -> "ExpPoly":
        table: dict = {}
        for r, p in self._terms.items():
            for k, c in p.items():
                _accumulate(table, r, k, c * r)
                if k:
                    _accumulate(table, r, k - 1, c * k)
        return ExpPoly._from_table(table, self.one_sided)

    def antiderivative(self) -> "ExpPoly":
        """A primitive ``F`` with ``F' = f`` (as whole-line smooth functions)."""
        table: dict = {}
        for r, p in self._terms.items():
            for k, c in p.items():
                for kk, cc in _primitive_term(k, r):
                    _accumulate(table, r, kk, c * cc)
        return ExpPoly._from_table(table, self.one_sided)

    def D(self, alpha) -> "ExpPoly":
        """``D^alpha f = f' - alpha f``."""
        return self.derivative() - self.scale(alpha)

    def J(self, alpha) -> "ExpPoly":
        """``J^alpha f(x) = int_x^inf exp(alpha (x - t)) f(t) dt``."""
        if self.one_sided:
            raise SupportError("J is defined here for whole-line functions only")
        table: dict = {}
        for r, p in self._terms.items():
            mu = r - alpha
            if not float(mu) < -RATE_TOL:
                raise DivergenceError(f"J^{alpha} diverges for term with rate {r}")
            for k, c in p.items():
                # int_x^inf t^k e^{mu t} dt = -F(x) where F is the primitive
                for kk, cc in _primitive_term(k, mu):
                    _accumulate(table, r, kk, -c * cc)
        return ExpPoly._from_table(table, False)

    def I(self, alpha) -> "ExpPoly":
        """``I^alpha f(x) = int_0^x exp(alpha (x - t)) f(t) dt`` (one-sided)."""
        if not self.one_sided and not self.is_zero():
            raise SupportError("I is defined for one-sided functions")
        table: dict = {}
        for r, p in self._terms.items():
            mu = r - alpha
            for k, c in p.items():
                prim = _primitive_term(k, mu)
                for kk, cc in prim:
                    _accumulate(table, r, kk, c * cc)
                f0 = sum((cc for kk, cc in prim if kk == 0), 0)
                if f0:
                    _accumulate(table, alpha, 0, -c * f0)
        return ExpPoly._from_table(table, True)

    def chain(self, op: str, rates) -> "ExpPoly":
        """Apply ``op`` ('D', 'J' or 'I') successively for each rate."""
        f = self
        for a in rates:
            f = getattr(f, op)(a)
        return f

    def integrate(self, a, b=math.inf):
        """Exact integral over ``[a, b]`` (``b`` may be infinite)."""
        if self.one_sided:
            a = max(a, 0)
            if b != math.inf and b <= a:
                return 0.0 if not _all_exact(self) else Fraction(0)
        F = self.antiderivative().as_whole_line()
        if b == math.inf:
            for r, p in self._terms.items():
                if not float(r) < -RATE_TOL:
                    raise DivergenceError(f"integral to infinity diverges (rate {r})")
            upper = 0
        else:
            upper = F.value_at(b)
        return upper - F.value_at(a)

    def value_at(self, x):
        """Evaluation keeping exact arithmetic when possible.

        Exact only at ``x == 0`` or when all rates are zero; otherwise floats.
        """
        if self.one_sided and x <= 0:
            return 0
        if _is_exact(x) and (x == 0 or all(_is_zero_rate(r) and _is_exact(r) for r in self._terms)):
            total = 0
            for r, p in self._terms.items():
                for k, c in p.items():
                    total += c * x**k if k else c
            return total
        return float(self(float(x)))

    def convolve(self, other: "ExpPoly") -> "ExpPoly":
        """One-sided convolution ``int_0^z f(y) g(z - y) dy``."""
        if not (self.one_sided or self.is_zero()) or not (other.one_sided or other.is_zero()):
            raise SupportError("convolution requires one-sided functions")
        table: dict = {}
        for lam, p in self._terms.items():
            for nu, q in other._terms.items():
                delta = lam - nu
                for k, a in p.items():
                    for l, b in q.items():
                        for m in range(l + 1):
                            w = a * b * comb(l, m) * (-1) ** m
                            # z^{l-m} e^{nu z} int_0^z y^{k+m} e^{delta y} dy
                            prim = _primitive_term(k + m, delta)
                            for kk, cc in prim:
                                _accumulate(table, nu + delta, kk + l - m, w * cc)
                            f0 = sum((cc for kk, cc in prim if kk == 0), 0)
                            if f0:
                                _accumulate(table, nu, l - m, -w * f0)
        return ExpPoly._from_table(table, True)

    def solve_adjoint(self) -> "ExpPoly":
        """Solve ``h''/2 + h' = f`` with ``h(0) = h'(0) = 0``."""
        table: dict = {}
        for lam, p in self._terms.items():
            for k, c in p.items():
                for kk, cc in _adjoint_particular(k, lam):
                    _accumulate(table, lam, kk, c * cc)
        hp = ExpPoly._from_table(table, False)
        h0 = hp.value_at(0)
        dh0 = hp.derivative().value_at(0)
        half = Fraction(1, 2) if _is_exact(dh0) else 0.5
        B = dh0 * half
        A = -h0 - B
        out = hp + ExpPoly([(A, 0, 0), (B, 0, -2)])
        return out.as_one_sided() if self.one_sided else out


def _exp_of(v):
    if _is_exact(v) and v == 0:
        return 1
    return math.exp(float(v))


def _mp(v):
    import mpmath as mp

    if isinstance(v, Fraction):
        return mp.mpf(v.numerator) / v.denominator
    return mp.mpf(v)


def _all_exact(f: ExpPoly) -> bool:
    return all(_is_exact(c) and _is_exact(r) for c, _, r in f.terms)


def _find_rate(table: dict, rate):
    if rate in table:
        return rate
    for key in table:
        if _same_rate(key, rate):
            return key
    return rate


def _accumulate(table: dict, rate, power: int, coeff):
    key = _find_rate(table, rate)
    poly = table.setdefault(key, {})
    poly[power] = poly.get(power, 0) + coeff


def _prune(table: dict) -> dict:
    out = {}
    for r, p in table.items():
        q = {k: c for k, c in p.items() if not _negligible(c)}
        if q:
            out[r] = q
    return out


def _copy_table(table: dict) -> dict:
    return {r: dict(p) for r, p in table.items()}


def _primitive_term(k: int, mu):
    """Coefficients ``(power, coeff)`` of a primitive of ``x^k e^{mu x}``.

    The primitive is ``e^{mu x} * sum coeff x^power``; for ``mu == 0`` it is
    ``x^{k+1}/(k+1)``.
    """
    if _is_zero_rate(mu):
        one = Fraction(1) if _is_exact(mu) else 1.0
        return [(k + 1, one / (k + 1))]
    out = []
    # e^{mu x} sum_j (-1)^j k!/(k-j)! x^{k-j} / mu^{j+1}
    for j in range(k + 1):
        ratio = factorial(k) // factorial(k - j)
        if _is_exact(mu):
            ratio = Fraction(ratio)
        out.append((k - j, (-1) ** j * ratio / mu ** (j + 1)))
    return out


def _adjoint_particular(k: int, lam):
    """Particular solution of ``q''/2 + q' = x^k e^{lam x}`` as ``e^{lam x} poly``."""
    exact = _is_exact(lam)
    half = Fraction(1, 2) if exact else 0.5
    p0 = half * lam * lam + lam
    p1 = lam + 1
    # L(e^{lam x} q) = e^{lam x} (p0 q + p1 q' + q''/2)
    resonant = abs(p0) <= RATE_TOL if not exact else p0 == 0
    if not resonant:
        q = [0] * (k + 1)
        for d in range(k, -1, -1):
            rhs = (1 if d == k else 0)
            if d + 1 <= k:
                rhs -= p1 * (d + 1) * q[d + 1]
            if d + 2 <= k:
                rhs -= half * (d + 2) * (d + 1) * q[d + 2]
            q[d] = rhs / p0 if not exact else Fraction(rhs) / p0
        return [(d, c) for d, c in enumerate(q) if c != 0]
    # resonance: r = q' solves p1 r + r'/2 = x^k, then q = int r
    r = [0] * (k + 1)
    for d in range(k, -1, -1):
        rhs = (1 if d == k else 0)
        if d + 1 <= k:
            rhs -= half * (d + 1) * r[d + 1]
        r[d] = rhs / p1 if not exact else Fraction(rhs) / p1
    return [(d + 1, c / (d + 1)) for d, c in enumerate(r) if c != 0]


# convenience functional wrappers -------------------------------------------

def ep_eval(f: ExpPoly, x):
    return f(x)


def ep_apply_D(f: ExpPoly, alpha) -> ExpPoly:
    return f.D(alpha)


def ep_apply_J(f: ExpPoly, alpha) -> ExpPoly:
    return f.J(alpha)


def ep_apply_I(f: ExpPoly, alpha) -> ExpPoly:
    return f.I(alpha)


def ep_convolve(f: ExpPoly, g: ExpPoly) -> ExpPoly:
    return f.convolve(g)


def ep_integrate(f: ExpPoly, a, b=math.inf):
    return f.integrate(a, b)


def ep_solve_adjoint(f: ExpPoly) -> ExpPoly:
    return f.solve_adjoint()


def integrate_ordered(factors: list[ExpPoly], upper=math.inf):
    """Integral of ``prod_j g_j(x_j)`` over ``0 <= x_1 <= ... <= x_n <= upper``.

    Computed by exact iterated antiderivatives.  Whole-line and one-sided
    factors are both accepted; the region already lies in ``x >= 0``.
    """
    acc = ExpPoly.const(Fraction(1) if all(_all_exact(g) for g in factors) else 1.0)
    for j, g in enumerate(factors):
        g = g.as_whole_line()
        h = acc * g
        if j == len(factors) - 1:
            return h.integrate(0, upper)
        F = h.antiderivative()
        acc = F - F.value_at(0)
    return 1


# ---------------------------------------------------------------------------
# Gaussian / Gaussian-tail functions in two variables
# ---------------------------------------------------------------------------

GAUSS, TAIL, ONE = "gauss", "tail", "one"
_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def _pmul(p: dict, q: dict) -> dict:
    out: dict = {}
    for (i1, j1), c1 in p.items():
        for (i2, j2), c2 in q.items():
            key = (i1 + i2, j1 + j2)
            out[key] = out.get(key, 0.0) + c1 * c2
    return out


def _padd(p: dict, q: dict, s: float = 1.0) -> dict:
    out = dict(p)
    for key, c in q.items():
        out[key] = out.get(key, 0.0) + s * c
    return out


def _pscale(p: dict, s: float) -> dict:
    return {k: c * s for k, c in p.items()}


def _ppow(p: dict, m: int) -> dict:
    out = {(0, 0): 1.0}
    for _ in range(m):
        out = _pmul(out, p)
    return out


def _linear(cx, cy, d) -> dict:
    out = {}
    if cx:
        out[(1, 0)] = float(cx)
    if cy:
        out[(0, 1)] = float(cy)
    if d:
        out[(0, 0)] = float(d)
    return out


def _round_key(v: float) -> float:
    v = float(v)
    return 0.0 if abs(v) < 1e-15 else v


class GaussErfcFun:
    """Sum of ``P(x,y) e^{a x + b y} K(cx x + cy y + d)`` with K in {phi, Q, 1}.

    Terms are stored in a dictionary keyed by ``(kind, a, b, cx, cy, d)`` with
    polynomial coefficient dictionaries ``{(i, j): c}`` for ``x^i y^j``.
    Gaussian terms are normalised to ``cx > 0`` (or ``cx == 0, cy >= 0``)
    using the evenness of ``phi``.
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: dict | None = None):
        self._terms: dict = {}
        if terms:
            for key, poly in terms.items():
                self._add(key, poly)
            self._prune()

    # -- internal -----------------------------------------------------------
    def _add(self, key, poly, scale=1.0):
        kind, a, b, cx, cy, d = key
        if kind == ONE:
            cx = cy = d = 0.0
        elif kind == GAUSS and (cx < 0 or (cx == 0 and cy < 0)):
            cx, cy, d = -cx, -cy, -d
        key = (kind, _round_key(a), _round_key(b), _round_key(cx), _round_key(cy), _round_key(d))
        cur = self._find(key)
        tgt = self._terms.setdefault(cur, {})
        for k, c in poly.items():
            tgt[k] = tgt.get(k, 0.0) + scale * c

    def _find(self, key):
        if key in self._terms:
            return key
        for k in self._terms:
            if k[0] == key[0] and all(abs(u - v) <= RATE_TOL for u, v in zip(k[1:], key[1:])):
                return k
        return key

    def _prune(self):
        out = {}
        for key, poly in self._terms.items():
            q = {k: c for k, c in poly.items() if abs(c) >= COEFF_TOL}
            if q:
                out[key] = q
        self._terms = out

    @classmethod
    def _build(cls, pieces) -> "GaussErfcFun":
        g = cls()
        for key, poly, s in pieces:
            g._add(key, poly, s)
        g._prune()
        return g

    # -- constructors -------------------------------------------------------
    @classmethod
    def gaussian(cls, cx, cy, d, coeff=1.0, a=0.0, b=0.0) -> "GaussErfcFun":
        return cls({(GAUSS, a, b, cx, cy, d): {(0, 0): coeff}})

    @classmethod
    def heat_kernel(cls, t: float, sign: int = -1) -> "GaussErfcFun":
        """``phi_t(y + sign*x)`` with ``phi_t(z) = phi(z/sqrt t)/sqrt t``."""
        s = 1.0 / math.sqrt(t)
        return cls.gaussian(sign * s, s, 0.0, coeff=s)

    @classmethod
    def psi(cls, t: float) -> "GaussErfcFun":
        """Killed kernel ``phi_t(y - x) - phi_t(y + x)``."""
        return cls.heat_kernel(t, -1) - cls.heat_kernel(t, +1)

    # -- inspection ---------------------------------------------------------
    @property
    def terms(self) -> list[tuple]:
        return [(key, dict(poly)) for key, poly in self._terms.items()]

    def kinds(self) -> set:
        return {k[0] for k in self._terms}

    def __len__(self):
        return sum(len(p) for p in self._terms.values())

    def __repr__(self):
        return f"GaussErfcFun({len(self._terms)} groups, {len(self)} terms)"

    # -- algebra ------------------------------------------------------------
    def __add__(self, other: "GaussErfcFun") -> "GaussErfcFun":
        g = GaussErfcFun()
        for key, poly in self._terms.items():
            g._add(key, poly)
        for key, poly in other._terms.items():
            g._add(key, poly)
        g._prune()
        return g

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s: float) -> "GaussErfcFun":
        return GaussErfcFun._build((k, p, s) for k, p in self._terms.items())

    # -- evaluation ---------------------------------------------------------
    def __call__(self, x, y):
        xa, ya = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        out = np.zeros(xa.shape)
        for (kind, a, b, cx, cy, d), poly in self._terms.items():
            pv = np.zeros(xa.shape)
            for (i, j), c in poly.items():
                pv = pv + c * xa**i * ya**j
            logk = a * xa + b * ya
            if kind == GAUSS:
                z = cx * xa + cy * ya + d
                logk = logk - 0.5 * z * z - _LOG_SQRT_2PI
            elif kind == TAIL:
                z = cx * xa + cy * ya + d
                logk = logk + special.log_ndtr(-z)
            out = out + pv * np.exp(logk)
        return out if out.ndim else float(out)

    def substitute_x(self, x0: float) -> "GaussErfcFun":
        """Freeze ``x = x0``; the result depends on ``y`` only."""
        pieces = []
        for (kind, a, b, cx, cy, d), poly in self._terms.items():
            newp: dict = {}
            for (i, j), c in poly.items():
                newp[(0, j)] = newp.get((0, j), 0.0) + c * x0**i
            s = math.exp(a * x0)
            pieces.append(((kind, 0.0, b, 0.0, cy, d + cx * x0), newp, s))
        return GaussErfcFun._build(pieces)

    def swap(self) -> "GaussErfcFun":
        """Exchange the roles of ``x`` and ``y``."""
        pieces = []
        for (kind, a, b, cx, cy, d), poly in self._terms.items():
            newp = {(j, i): c for (i, j), c in poly.items()}
            pieces.append(((kind, b, a, cy, cx, d), newp, 1.0))
        return GaussErfcFun._build(pieces)

    # -- calculus -----------------------------------------------------------
    def diff(self, var: str = "y") -> "GaussErfcFun":
        """Partial derivative in ``var``."""
        if var == "x":
            return self.swap().diff("y").swap()
        pieces = []
        for key, poly in self._terms.items():
            kind, a, b, cx, cy, d = key
            dpoly = {}
            for (i, j), c in poly.items():
                if j:
                    dpoly[(i, j - 1)] = dpoly.get((i, j - 1), 0.0) + c * j
            pieces.append((key, dpoly, 1.0))
            if b:
                pieces.append((key, poly, b))
            if kind == GAUSS and cy:
                pieces.append((key, _pmul(poly, _linear(cx, cy, d)), -cy))
            elif kind == TAIL and cy:
                pieces.append(((GAUSS, a, b, cx, cy, d), poly, -cy))
        return GaussErfcFun._build(pieces)

    def D(self, alpha: float, var: str = "y") -> "GaussErfcFun":
        return self.diff(var) - self.scale(alpha)

    def J(self, beta: float, var: str = "x") -> "GaussErfcFun":
        """``J^beta`` acting in ``var``: ``int_var^inf e^{beta(var-u)} f(u) du``."""
        if var == "y":
            return self.swap().J(beta, "x").swap()
        pieces = []
        for key, poly in self._terms.items():
            for i in sorted({i for i, _ in poly}):
                ypoly = {(0, j): c for (ii, j), c in poly.items() if ii == i}
                pieces.extend(_j_monomial(key, i, ypoly, beta))
        return GaussErfcFun._build(pieces)

    def integrate_y(self, lo: float) -> "GaussErfcFun":
        """``int_lo^inf f(x, y) dy`` as a function of ``x`` (placed in ``x``)."""
        return self.J(0.0, "y").swap().substitute_x(lo).swap()


def _j_monomial(key, k: int, ypoly: dict, beta: float) -> list:
    """J^beta in x of ``x^k * ypoly(y) * e^{ax+by} K(cx x + cy y + d)``."""
    kind, a, b, cx, cy, d = key
    m = a - beta
    out = []
    if kind == ONE or cx == 0:
        if not m < -RATE_TOL:
            raise DivergenceError(f"J^{beta} diverges for x-rate {a}")
        for kk, cc in _primitive_term(k, float(m)):
            # e^{beta x} * (-e^{m x} x^kk cc) = -cc x^kk e^{a x}
            out.append(((kind, a, b, cx, cy, d), _pmul({(kk, 0): 1.0}, ypoly), -cc))
        return out
    if cx < 0:
        raise ExpFunError("tail or gaussian term with negative x-scale cannot be J-integrated")
    if kind == GAUSS:
        return _j_gauss(k, ypoly, m, a, b, cx, cy, d, beta)
    # tail: integrate by parts against the primitive A of u^k e^{m u}
    prim = _primitive_term(k, float(m))
    mm = 0.0 if abs(m) <= RATE_TOL else m
    # -A(x) Q(cx x + e): A(u) = e^{mm u} sum cc u^kk; times e^{beta x} gives rate beta+mm
    for kk, cc in prim:
        out.append(((TAIL, beta + mm, b, cx, cy, d), _pmul({(kk, 0): 1.0}, ypoly), -cc))
    # + cx * int_x^inf A(u) phi(cx u + e) du, again with the e^{beta(x-u)} weight folded:
    # int_x^inf e^{beta(x-u)} e^{beta u} A(u) phi(...) du = J^beta[e^{(beta+mm)u} poly phi]
    for kk, cc in prim:
        out.extend(_j_gauss(kk, _pscale(ypoly, cc * cx), mm, beta + mm, b, cx, cy, d, beta))
    return out


def _j_gauss(k, ypoly, m, a, b, cx, cy, d, beta) -> list:
    """J^beta in x of ``x^k ypoly(y) e^{a x + b y} phi(cx x + cy y + d)``, m = a - beta."""
    # e^{m u} phi(cx u + e) = exp(m^2/(2cx^2) - m e/cx) phi(cx u + e - m/cx),  e = cy y + d
    s = m / cx
    const = math.exp(0.5 * s * s - s * d)
    b2 = b - s * cy
    d2 = d - s
    # int_x^inf u^k phi(cx u + e') du with u = (v - e')/cx, v from z = cx x + e'
    # = cx^{-k-1} sum_j C(k,j) (-e')^{k-j} M_j(z)
    eprime = _linear(0.0, cy, d2)
    zpoly = _linear(cx, cy, d2)
    out = []
    for j in range(k + 1):
        w = comb(k, j) * cx ** (-k - 1)
        epow = _pscale(_ppow(eprime, k - j), (-1) ** (k - j))
        base = _pscale(_pmul(epow, ypoly), w * const)
        pcoef, qcoef = _moment_tail(j)
        # M_j(z) = poly_j(z) phi(z) + qcoef Q(z)
        if pcoef:
            pz: dict = {}
            for deg, c in pcoef.items():
                pz = _padd(pz, _ppow(zpoly, deg), c)
            out.append(((GAUSS, beta, b2, cx, cy, d2), _pmul(base, pz), 1.0))
        if qcoef:
            out.append(((TAIL, beta, b2, cx, cy, d2), base, qcoef))
    return out


_MOMENT_CACHE: dict = {}


def _moment_tail(j: int):
    """``int_z^inf v^j phi(v) dv = sum p_deg z^deg phi(z) + q Q(z)``."""
    if j in _MOMENT_CACHE:
        return _MOMENT_CACHE[j]
    if j == 0:
        res = ({}, 1.0)
    elif j == 1:
        res = ({0: 1.0}, 0.0)
    else:
        p2, q2 = _moment_tail(j - 2)
        p = {deg: (j - 1) * c for deg, c in p2.items()}
        p[j - 1] = p.get(j - 1, 0.0) + 1.0
        res = (p, (j - 1) * q2)
    _MOMENT_CACHE[j] = res
    return res


def ge_kernel_entry(t: float, alpha_left, alpha_right) -> GaussErfcFun:
    """``D_y^{alpha_right...} J_x^{-alpha_left...} psi_t(x, y)`` as a bivariate function.

    ``alpha_left`` lists the rates whose negatives feed the J chain (row
    index), ``alpha_right`` the D chain (column index).
    """
    f = GaussErfcFun.psi(t)
    for a in alpha_left:
        f = f.J(-a, "x")
    for a in alpha_right:
        f = f.D(a, "y")
    return f


def ge_kernel_entry_at(t: float, x: float, alpha_left, alpha_right) -> GaussErfcFun:
    """Kernel entry as a function of ``y`` for fixed ``x``."""
    return ge_kernel_entry(t, alpha_left, alpha_right).substitute_x(x)
