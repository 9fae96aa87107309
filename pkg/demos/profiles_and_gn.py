"""Solve the rescaled profile equations with the Petviashvili iteration and
turn the profiles into sharp Gagliardo-Nirenberg constants."""

import math

import numpy as np

from bnlslab.functionals import ModelParams, gn_deficit, j_functional
from bnlslab.grid import Field, make_grid, quadratic_parts
from bnlslab.groundstate import solve_profile
from bnlslab.thresholds import gn_constants

grid = make_grid(1, 512, 32 * math.pi)

for p in (3.0, 5.0):
    q = solve_profile("qp", ModelParams(1, p), grid)
    gn = gn_constants(q)
    print(f"p = {p:g}: {q.iterations} iterations, ||Q_p||_2 = {gn.q_norm_L2:.10f}")
    print(f"   B = {gn.B_pd:.10f}, 1/J(Q_p) = {1 / j_functional(q.profile, q.params):.10f}")

    # Q_p is the optimizer: perturbing it by eps costs a deficit of order eps^2
    x = grid.axis
    bump = Field(grid, (x + 0.3 * np.cos(x)) * np.exp(-x**2 / 8) + 0j)
    for eps in (1e-1, 1e-2, 1e-3):
        deficit, scale = gn_deficit(q.profile + bump.scaled(eps), q.params, gn)
        print(f"   eps = {eps:g}: relative GN deficit {deficit / scale:.3e}")

qstar = solve_profile("qstar", ModelParams(1, 9.0), grid)
a, g, m = quadratic_parts(qstar.profile)
print(f"Q*: ||Q*||^2 = {m:.10f}, ||DQ*||^2 = {a:.10f}, ||grad Q*||^2 = {g:.10f}")
