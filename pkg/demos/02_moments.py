"""
Lebesgue moments of the constraint set
======================================

The hierarchy objective integrates w against the Lebesgue measure on X, so
it needs the vector of monomial moments. Balls and boxes have closed forms;
anything else falls back to seeded Monte Carlo over the enclosing ball.
"""

import numpy as np

from mpiset.moments import ball_moment, basis, box_moment, moment_vector
from mpiset.polynomials import Polynomial
from mpiset.sets import SemialgebraicSet

# unit-disk moments: volume pi, odd moments vanish, quadratics give pi/4
for alpha in [(0, 0), (1, 0), (2, 0), (2, 2), (0, 6)]:
    print(f"disk moment {alpha}: {ball_moment(2, 1.0, alpha):.12f}")

# the same numbers through the dispatching front end
x1 = Polynomial.variable(2, 0)
x2 = Polynomial.variable(2, 1)
disk = SemialgebraicSet([1.0 - x1 ** 2 - x2 ** 2])
mv = moment_vector(disk, 4)
print("method:", mv.method, "| basis size:", len(mv.basis))
print("values:", np.round(mv.values[:6], 6))

# boxes are recognized from per-coordinate interval constraints
box = SemialgebraicSet([x1, 1.0 - x1, 4.0 - x2 ** 2])
mvb = moment_vector(box, 3)
print("box method:", mvb.method)
print("int over [0,1]x[-2,2] of x2^2 =", mvb.value((0, 2)), "(exact 16/3)")
print("closed form check:", box_moment([(0.0, 1.0), (-2.0, 2.0)], (0, 2)))

# a redundant constraint defeats the pattern matchers: Monte Carlo kicks in,
# with a standard error attached to every entry. The first ball-form
# constraint (radius 2 here) defines the sampling envelope, so the unit
# disk is hit by rejection.
odd = SemialgebraicSet(
    [Polynomial.constant(2, 4.0) - x1 ** 2 - x2 ** 2, 1.0 - x1 ** 2 - x2 ** 2]
)
mvm = moment_vector(odd, 4, mc_samples=200_000, seed=7)
print("fallback method:", mvm.method)
for alpha in [(0, 0), (2, 0), (2, 2)]:
    i = mvm.basis.index(alpha)
    exact = ball_moment(2, 1.0, alpha)
    print(
        f"  mc {alpha}: {mvm.values[i]:.5f} +/- {mvm.stderrs[i]:.5f}"
        f"  (exact {exact:.5f})"
    )

print("basis order is graded lexicographic:", basis(2, 2))
