"""Minimize E_mu on the unit-mass sphere for d = 1, p = 3 and watch how the
minimum energy moves with the dispersion coefficient mu."""

import math

from bnlslab.functionals import ModelParams
from bnlslab.grid import make_grid, norm_L2
from bnlslab.groundstate import minimization_curve

grid = make_grid(1, 256, 32 * math.pi)
mus = [-1.0, -0.5, 0.0, 0.5, 1.0]
curve = minimization_curve([ModelParams(1, 3.0, mu) for mu in mus], grid)

print(f"{'mu':>6} {'m_mu':>14} {'omega':>10} {'iters':>6}  status")
for mu, energy, res in curve:
    print(f"{mu:6.2f} {energy:14.8f} {res.lagrange_omega:10.5f} {res.iterations:6d}  {res.status}")

# the minimizer is real up to a phase and sits on the mass sphere
_, _, best = curve[0]
print("mass of the mu = -1 minimizer:", norm_L2(best.profile) ** 2)
print("Pohozaev residuals:", best.pohozaev.r1_normalized, best.pohozaev.r2_normalized)
