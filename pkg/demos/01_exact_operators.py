"""Exact exp-polynomial algebra: the operators D, J, I and convolution.

Functions are finite sums of c x^k e^{a x} with rational coefficients, so every
identity below holds exactly, not just to rounding.
"""
from fractions import Fraction as Fr

from flatlpp.expfun import ExpPoly, GaussErfcFun, ge_kernel_entry

f = ExpPoly([(1, 1, -2), (Fr(1, 3), 0, -1)])
print("f(x)            =", f)
print("D_1 f           =", f.D(1))
print("J_1 f           =", f.J(1))
print("D_1 J_1 f + f   =", f.J(1).D(1) + f, "(exactly zero)")

one = ExpPoly.const(1, one_sided=True)
print("1 * 1 (convolution on [0, inf)) =", one.convolve(one))
print("I_0 1           =", one.I(0))

# h'' / 2 + h' = f with h(0) = h'(0) = 0
h = ExpPoly.exp(Fr(-2), 2).solve_adjoint()
print("adjoint solution =", h)

# the reflected heat kernel built from Gaussian and erfc-tail terms
k = GaussErfcFun.heat_kernel(0.5)
print("heat kernel p_0.5(0.3, 1.1) =", k(0.3, 1.1))
entry = ge_kernel_entry(0.7, (0.0,), (0.0,))
print("reflected kernel at drift 0, (x, y) = (0.4, 1.0):", entry(0.4, 1.0))
