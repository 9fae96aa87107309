"""At the mass-critical power p = 9 (d = 1) a constrained minimizer of
E_{mu,b} exists for b between b_* and b*. Compute the window, solve inside it,
and show the divergence detector firing above b*."""

import math

from bnlslab.functionals import ModelParams
from bnlslab.grid import make_grid
from bnlslab.groundstate import solve_constrained, solve_profile
from bnlslab.thresholds import critical_thresholds

grid = make_grid(1, 1024, 32 * math.pi)
qstar = solve_profile("qstar", ModelParams(1, 9.0), grid)

lam1 = critical_thresholds(qstar, 0.0).lambda1
print(f"lambda1 = {lam1:.10f}")
for t in (0.25, 0.5, 0.75):
    ct = critical_thresholds(qstar, -t * lam1)
    print(f"mu = -{t} lambda1: b_* = {ct.b_lower:.6f}, b* = {ct.b_star:.6f}, beta = {ct.beta:.6f}")

ct = critical_thresholds(qstar, -0.5 * lam1)
for b in (0.5 * (ct.b_lower + ct.b_star), 1.05 * ct.b_star):
    res = solve_constrained(ModelParams(1, 9.0, ct.mu, b), grid, problem="VPb")
    print(f"b = {b:9.4f}: {res.status:9s} energy {res.energy:.6e}  (-mu^2/8 = {-ct.mu**2 / 8:.6f}) {res.message}")
