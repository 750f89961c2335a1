"""
One tightening, up close
========================

Assembles the order-1 program for the radial contraction on the unit disk,
looks at the semidefinite blocks it produces, solves it, and checks the
returned certificate by hand: sampled constraint residuals, duality gap,
and an eigenvalue pass over the Gram blocks.
"""

import numpy as np

from mpiset.hierarchy import MODE_FORCED, OdeSystem, build_tightening, solve_tightening
from mpiset.polynomials import Polynomial, lie_derivative
from mpiset.sets import SemialgebraicSet

x1 = Polynomial.variable(2, 0)
x2 = Polynomial.variable(2, 1)
disk = SemialgebraicSet([1.0 - x1 ** 2 - x2 ** 2])
contraction = OdeSystem((-1.0 * x1, -1.0 * x2))

# the program: four polynomial identities over SOS multipliers
program = build_tightening(contraction, disk, k=1, T=1.0, mode=MODE_FORCED)
problem = program.compile()
print("decision variables:", problem.n_vars)
print("equality rows:     ", problem.n_eq)
print("psd blocks:")
for name, dim, _ in problem.psd_blocks:
    print(f"  {name:10s} {dim}x{dim}")

# solve and extract; d_1 should be pi/2 (the relaxation certifies the inner
# half of the disk by area at this order, shrinking like pi/(2k))
cert = solve_tightening(contraction, disk, k=1, T=1.0, mode=MODE_FORCED)
print("status:", cert.status.name, "| d_1 =", f"{cert.objective:.9f}")
print("moment-side value:", f"{cert.moment_value:.9f}",
      "| gap:", f"{abs(cert.objective - cert.moment_value):.2e}")

# independent residual check on fresh samples, away from the solver entirely
pts = disk.sample_interior(2000, seed=1)
lie_v = lie_derivative(cert.v, list(contraction.f))
print("max L_f v on interior:  ", f"{lie_v.eval_batch(pts).max():.3e}  (must be <= u = {cert.u})")
print("min (w - v - 1) interior:", f"{(cert.w - cert.v - 1.0).eval_batch(pts).min():.3e}")
print("min w on interior:       ", f"{cert.w.eval_batch(pts).min():.3e}")
bnd = np.array(disk.sample_boundary(500, seed=2))
print("min v on boundary:       ", f"{cert.v.eval_batch(bnd).min():.3e}")
print("min Gram eigenvalue:     ", f"{cert.solver_stats['min_gram_eig']:.3e}")
