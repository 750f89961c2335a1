"""
Known-answer systems and the validation tools
=============================================

Two fields where the maximal positively invariant subset of the unit disk
is known exactly bracket the pipeline from both sides:

  contraction f = (-x1, -x2): every point stays, the target measure is pi
  expansion   f = ( x1,  x2): only the origin stays, the target measure is 0

The hierarchy objective d_k is the measure of the region the order-k
relaxation fails to certify, so it should fall like pi/(2k) for the
contraction and sit at pi for the expansion.
"""

import math

from mpiset.hierarchy import MODE_FORCED, MODE_SLACK, OdeSystem, run_hierarchy
from mpiset.polynomials import Polynomial
from mpiset.sets import SemialgebraicSet
from mpiset.validation import estimate_avg_exit_time, estimate_volume, integrate

x1 = Polynomial.variable(2, 0)
x2 = Polynomial.variable(2, 1)
disk = SemialgebraicSet([1.0 - x1 ** 2 - x2 ** 2])

contraction = OdeSystem((-1.0 * x1, -1.0 * x2))
run = run_hierarchy(contraction, disk, [1, 2, 3], T=1.0, mode=MODE_FORCED)
print("contraction ladder:")
for c in run.certificates:
    print(f"  k={c.k}: d_k = {c.objective:.9f}   (pi/{2 * c.k} = {math.pi / (2 * c.k):.9f})")

v3 = run.certificate(3).v
margin = 1e-3 * (1.0 + v3.max_abs_coeff())
vol, err = estimate_volume(v3, disk, 100_000, seed=3, level=-margin)
print(f"certified volume at k=3: {vol:.4f} +/- {err:.4f} of {math.pi:.4f}")

# expansion: trajectories leave; the average exit time over the disk is 1/2
expansion = OdeSystem((1.0 * x1, 1.0 * x2))
est = estimate_avg_exit_time(expansion, disk, samples=2000, horizon=50.0, seed=0)
print(f"\nexpansion mean exit time: {est['tau_bar']:.4f} +/- {est['stderr']:.4f}"
      "  (exact 0.5)")

# one trajectory in detail: from (0.5, 0) the exit happens at exactly ln 2
traj = integrate(expansion, disk, [0.5, 0.0], horizon=10.0)
print(f"exit from (0.5, 0) at t = {traj.exit_time:.9f}  (ln 2 = {math.log(2):.9f})")

# the hierarchy agrees: d_k stays at pi and the solved v is flagged as
# degenerate (the exact optimum is v = 0, so no inner-set claim is made)
run2 = run_hierarchy(expansion, disk, [2, 4, 6], T=2.0, mode=MODE_SLACK)
print("\nexpansion ladder:")
for c in run2.certificates:
    print(f"  k={c.k}: d_k = {c.objective:.9f}   degenerate={c.degenerate}")
