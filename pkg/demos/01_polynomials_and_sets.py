"""
Sparse polynomials and semialgebraic sets
=========================================

The building blocks everything else sits on: exponent-keyed polynomials,
the text grammar, Lie derivatives, and membership tests with boundary
classification.
"""

import numpy as np

from mpiset.polynomials import Polynomial, lie_derivative, parse_polynomial
from mpiset.sets import Membership, SemialgebraicSet

x1 = Polynomial.variable(2, 0)
x2 = Polynomial.variable(2, 1)

# arithmetic stays sparse: only monomials that survive cancellation are stored
p = (1.0 - x1 ** 2 - x2 ** 2) * (x1 + 3.0)
print("p          =", p)
print("p(0.5,0.5) =", p.eval([0.5, 0.5]))
print("deg p      =", p.degree())

# the same polynomial from its text form; implicit multiplication is allowed
q = parse_polynomial("3 - 3 x1^2 - 3 x2^2 + x1 - x1^3 - x1 x2^2", 2)
print("parsed == constructed:", q == p)

# Lie derivative of |x|^2 along the reversed van der Pol field
vdp = [
    parse_polynomial("-2 x2", 2),
    parse_polynomial("0.8 x1 + 10.404 x1^2 x2 - 2 x2", 2),
]
r2 = x1 ** 2 + x2 ** 2
print("L_f |x|^2  =", lie_derivative(r2, vdp))

# the unit disk as {g >= 0}; membership is a trichotomy with a boundary band
disk = SemialgebraicSet([1.0 - x1 ** 2 - x2 ** 2])
for pt in ([0.2, 0.1], [1.0, 0.0], [1.1, 0.0]):
    print(f"contains({pt}) -> {disk.contains(np.array(pt)).name}")

# samplers are deterministic given a seed
pts = disk.sample_interior(5, seed=0)
print("five interior draws:")
print(np.round(pts, 4))
print("all interior:", all(disk.contains(p) is Membership.INTERIOR for p in pts))

bnd = disk.sample_boundary(3, seed=0)
print("boundary radii:", [f"{np.linalg.norm(b):.12f}" for b in bnd])
